#pragma once

#include <algorithm>
#include <cstdint>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "catephi/dgp.hpp"
#include "catephi/encoder.hpp"
#include "catephi/errors.hpp"
#include "catephi/matrix.hpp"
#include "catephi/rng.hpp"

namespace catephi {

// One observational unit. x and true_cate are generator-side ground truth;
// estimators only ever see the views built by make_train_set / test phi.
struct Record {
    int t = 0;
    double y = 0.0;
    std::vector<double> phi;
    std::vector<double> x;
    int s = 0;
    double true_cate = 0.0;
    double p_s = 0.0;  // probability with which s was drawn
};

struct Dataset {
    Benchmark benchmark = Benchmark::synsum;
    std::vector<Record> records;
    std::vector<std::size_t> train_indices;
    std::vector<std::size_t> test_indices;
    RepresentationEncoder encoder;

    const CovariateSchema& schema() const { return schema_for(benchmark); }
    int phi_dim() const { return records.empty() ? 0 : static_cast<int>(records[0].phi.size()); }
    int background_dim() const { return static_cast<int>(schema().background_names.size()); }
};

// Generates n records with s = 0 everywhere and a deterministic 90/10
// train/test split (floor(n/10) test rows).
inline Dataset build_dataset(Benchmark benchmark, int n, const EncoderConfig& enc_cfg,
                             std::uint64_t seed, const SynsumPriors& synsum_priors = {},
                             const MimicPriors& mimic_priors = {}) {
    if (n < 10) throw ConfigError("build_dataset: n must be at least 10");
    Dataset ds;
    ds.benchmark = benchmark;
    const auto& schema = schema_for(benchmark);
    ds.encoder = RepresentationEncoder(enc_cfg, static_cast<int>(schema.embedded_names.size()));
    ds.records.resize(n);

    std::uint64_t draw_seed = derive_seed(seed, 0xD0);
    std::uint64_t record_seed = derive_seed(seed, 0xD1);
    if (benchmark == Benchmark::synsum) {
        auto draws = synsum_sample(n, draw_seed, synsum_priors);
        for (int i = 0; i < n; ++i) {
            Record& r = ds.records[i];
            r.t = draws[i].t;
            r.y = draws[i].y;
            r.true_cate = draws[i].true_cate;
            r.x = synsum_x_vector(draws[i].x);
            r.phi = ds.encoder.encode(synsum_embedded_vector(draws[i].x),
                                      synsum_background_vector(draws[i].x),
                                      derive_seed(record_seed, i));
        }
    } else {
        auto draws = mimic_sample(n, draw_seed, mimic_priors);
        for (int i = 0; i < n; ++i) {
            Record& r = ds.records[i];
            r.t = draws[i].t;
            r.y = draws[i].y;
            r.true_cate = draws[i].true_cate;
            r.x = mimic_x_vector(draws[i].x);
            r.phi = ds.encoder.encode(mimic_embedded_vector(draws[i].x),
                                      mimic_background_vector(draws[i].x),
                                      derive_seed(record_seed, i));
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng split_rng(derive_seed(seed, 0xD2));
    split_rng.shuffle(order);
    std::size_t n_test = static_cast<std::size_t>(n) / 10;
    ds.test_indices.assign(order.begin(), order.begin() + n_test);
    ds.train_indices.assign(order.begin() + n_test, order.end());
    std::sort(ds.test_indices.begin(), ds.test_indices.end());
    std::sort(ds.train_indices.begin(), ds.train_indices.end());
    return ds;
}

// --- Estimator-visible views ------------------------------------------------

// Training row as an estimator sees it: x is populated only when s == 1.
struct EstRow {
    int t = 0;
    double y = 0.0;
    std::vector<double> phi;
    int s = 0;
    std::vector<double> x;  // empty unless s == 1
    double p_s = 0.0;
};

struct TrainSet {
    Benchmark benchmark = Benchmark::synsum;
    int phi_dim = 0;
    std::vector<EstRow> rows;

    const CovariateSchema& schema() const { return schema_for(benchmark); }
};

// Builds the estimator-visible training set, optionally overriding the
// stored annotation flags and probabilities (sweeps redraw them per cell
// without mutating the dataset).
inline TrainSet make_train_set(const Dataset& ds, const std::vector<int>* s_override = nullptr,
                               const std::vector<double>* p_s_override = nullptr) {
    TrainSet ts;
    ts.benchmark = ds.benchmark;
    ts.phi_dim = ds.phi_dim();
    ts.rows.reserve(ds.train_indices.size());
    for (std::size_t idx : ds.train_indices) {
        const Record& r = ds.records[idx];
        EstRow row;
        row.t = r.t;
        row.y = r.y;
        row.phi = r.phi;
        row.s = s_override ? (*s_override)[idx] : r.s;
        row.p_s = p_s_override ? (*p_s_override)[idx] : r.p_s;
        if (row.s == 1) row.x = r.x;
        ts.rows.push_back(std::move(row));
    }
    return ts;
}

// --- CSV export / import ------------------------------------------------------
//
// Dataset CSV: header then one row per record with columns
//   t,y,s,phi_0..phi_{d-1},x_<name>..,true_cate
// x cells are written only for rows with s == 1. A separate ground-truth
// covariates CSV (columns x_<name>..) always carries the full covariates so
// that annotation can be re-drawn after reloading. The split file lists
// "index,role" rows and the encoder projection uses the matrix format.

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace detail

inline void write_dataset_csv(std::ostream& out, const Dataset& ds) {
    const auto& schema = ds.schema();
    out << "t,y,s";
    for (int j = 0; j < ds.phi_dim(); ++j) out << ",phi_" << j;
    for (const auto& name : schema.x_names) out << ",x_" << name;
    out << ",true_cate\n";
    for (const Record& r : ds.records) {
        out << r.t << ',' << detail::format_decimal(r.y) << ',' << r.s;
        for (double v : r.phi) out << ',' << detail::format_decimal(v);
        for (std::size_t j = 0; j < schema.x_names.size(); ++j) {
            out << ',';
            if (r.s == 1) out << detail::format_decimal(r.x[j]);
        }
        out << ',' << detail::format_decimal(r.true_cate) << '\n';
    }
}

inline void write_covariates_csv(std::ostream& out, const Dataset& ds) {
    const auto& schema = ds.schema();
    for (std::size_t j = 0; j < schema.x_names.size(); ++j)
        out << (j ? "," : "") << "x_" << schema.x_names[j];
    out << '\n';
    for (const Record& r : ds.records) {
        for (std::size_t j = 0; j < schema.x_names.size(); ++j)
            out << (j ? "," : "") << detail::format_decimal(r.x[j]);
        out << '\n';
    }
}

inline void write_split_csv(std::ostream& out, const Dataset& ds) {
    out << "index,role\n";
    std::vector<char> is_test(ds.records.size(), 0);
    for (std::size_t i : ds.test_indices) is_test[i] = 1;
    for (std::size_t i = 0; i < ds.records.size(); ++i)
        out << i << ',' << (is_test[i] ? "test" : "train") << '\n';
}

// Reads a dataset back. The covariates stream may be null, in which case x
// is only available for rows exported with s == 1.
inline Dataset read_dataset_csv(std::istream& data, std::istream& split,
                                std::istream* covariates = nullptr) {
    std::string line;
    if (!std::getline(data, line)) throw IoError("dataset csv: empty file");
    auto header = detail::split_csv_line(line);
    if (header.size() < 5 || header[0] != "t" || header[1] != "y" || header[2] != "s")
        throw IoError("dataset csv: unexpected header");

    int phi_dim = 0;
    std::size_t col = 3;
    while (col < header.size() && header[col].rfind("phi_", 0) == 0) {
        ++phi_dim;
        ++col;
    }
    std::vector<std::string> x_names;
    while (col < header.size() && header[col].rfind("x_", 0) == 0) {
        x_names.push_back(header[col].substr(2));
        ++col;
    }
    if (col + 1 != header.size() || header[col] != "true_cate")
        throw IoError("dataset csv: unexpected trailing columns");

    Benchmark benchmark;
    if (x_names == schema_for(Benchmark::synsum).x_names)
        benchmark = Benchmark::synsum;
    else if (x_names == schema_for(Benchmark::mimic).x_names)
        benchmark = Benchmark::mimic;
    else
        throw IoError("dataset csv: covariate columns match no known benchmark");

    Dataset ds;
    ds.benchmark = benchmark;
    while (std::getline(data, line)) {
        if (line.empty()) continue;
        auto cells = detail::split_csv_line(line);
        if (cells.size() != header.size()) throw IoError("dataset csv: ragged row");
        Record r;
        r.t = static_cast<int>(detail::parse_decimal(cells[0]));
        r.y = detail::parse_decimal(cells[1]);
        r.s = static_cast<int>(detail::parse_decimal(cells[2]));
        r.phi.reserve(phi_dim);
        for (int j = 0; j < phi_dim; ++j) r.phi.push_back(detail::parse_decimal(cells[3 + j]));
        if (r.s == 1) {
            r.x.reserve(x_names.size());
            for (std::size_t j = 0; j < x_names.size(); ++j) {
                const std::string& cell = cells[3 + phi_dim + j];
                if (cell.empty()) throw IoError("dataset csv: missing covariate on annotated row");
                r.x.push_back(detail::parse_decimal(cell));
            }
        }
        r.true_cate = detail::parse_decimal(cells.back());
        ds.records.push_back(std::move(r));
    }

    if (covariates) {
        if (!std::getline(*covariates, line)) throw IoError("covariates csv: empty file");
        std::size_t i = 0;
        while (std::getline(*covariates, line)) {
            if (line.empty()) continue;
            if (i >= ds.records.size()) throw IoError("covariates csv: too many rows");
            auto cells = detail::split_csv_line(line);
            if (cells.size() != x_names.size()) throw IoError("covariates csv: ragged row");
            std::vector<double> x;
            x.reserve(cells.size());
            for (const auto& c : cells) x.push_back(detail::parse_decimal(c));
            ds.records[i].x = std::move(x);
            ++i;
        }
        if (i != ds.records.size()) throw IoError("covariates csv: too few rows");
    }

    if (!std::getline(split, line)) throw IoError("split csv: empty file");
    while (std::getline(split, line)) {
        if (line.empty()) continue;
        auto cells = detail::split_csv_line(line);
        if (cells.size() != 2) throw IoError("split csv: ragged row");
        std::size_t idx = static_cast<std::size_t>(detail::parse_decimal(cells[0]));
        if (idx >= ds.records.size()) throw IoError("split csv: index out of range");
        if (cells[1] == "test")
            ds.test_indices.push_back(idx);
        else if (cells[1] == "train")
            ds.train_indices.push_back(idx);
        else
            throw IoError("split csv: role must be train or test");
    }
    std::sort(ds.test_indices.begin(), ds.test_indices.end());
    std::sort(ds.train_indices.begin(), ds.train_indices.end());
    if (ds.train_indices.size() + ds.test_indices.size() != ds.records.size())
        throw IoError("split csv: does not cover every record exactly once");
    return ds;
}

}  // namespace catephi
