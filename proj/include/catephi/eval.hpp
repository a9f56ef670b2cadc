#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "catephi/annotation.hpp"
#include "catephi/dataset.hpp"
#include "catephi/errors.hpp"
#include "catephi/estimators.hpp"

namespace catephi {

// Root mean squared error between predicted effects and ground-truth CATEs.
inline double pehe(std::span<const double> predictions, std::span<const double> true_cates) {
    if (predictions.empty() || predictions.size() != true_cates.size())
        throw EvalError("pehe: inputs must be non-empty and of equal length");
    double acc = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        double d = predictions[i] - true_cates[i];
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(predictions.size()));
}

struct SweepConfig {
    Benchmark benchmark = Benchmark::synsum;
    SamplingKind sampling = SamplingKind::random;
    std::vector<int> annotation_levels;
    std::vector<EstimatorKind> methods;
    int n_runs = 5;
    std::uint64_t base_seed = 0;
    int dataset_size = 10000;
    EncoderConfig encoder;
    EstimatorConfig estimator;
    SamplingPolicy selective_policy;  // table used when sampling == selective
    SynsumPriors synsum_priors;
    MimicPriors mimic_priors;
    int jobs = 0;  // 0 = hardware concurrency
};

struct SweepCell {
    EstimatorKind method = EstimatorKind::plug_in;
    int level = 0;
    int run = 0;
    std::uint64_t seed = 0;
    double pehe = 0.0;
    bool failed = false;
    std::string error;
};

struct SweepAggregate {
    EstimatorKind method = EstimatorKind::plug_in;
    int level = 0;
    double mean_pehe = 0.0;
    double ci_halfwidth = 0.0;  // 1.96 * sd / sqrt(n), 0 when n < 2
    int n_ok = 0;
};

struct SweepResult {
    Benchmark benchmark = Benchmark::synsum;
    SamplingKind sampling = SamplingKind::random;
    int n_runs = 0;
    std::uint64_t base_seed = 0;
    std::vector<SweepCell> cells;
    std::vector<SweepAggregate> aggregates;
    bool any_failed = false;
};

namespace detail {

// Annotation draws are keyed on (level, run) only, so every method inside a
// cell group sees the same annotated subset; model weights additionally key
// on the method through per-model stream tags.
inline std::uint64_t sweep_s_seed(std::uint64_t base, std::size_t level_idx, int run) {
    return derive_seed(derive_seed(base, 0x5000 + level_idx), 0x50000 + run);
}
inline std::uint64_t sweep_w_seed(std::uint64_t base, std::size_t level_idx, int run) {
    return derive_seed(derive_seed(base, 0x7000 + level_idx), 0x70000 + run);
}

}  // namespace detail

inline std::uint64_t sweep_dataset_seed(std::uint64_t base_seed) {
    return derive_seed(base_seed, 0xDA7A);
}

// Runs every (method, level, run) cell against a fixed dataset and test
// split. Each run redraws the annotation flags and model weights; cell
// failures are recorded and the sweep continues.
inline SweepResult run_sweep(const SweepConfig& cfg, const Dataset* prebuilt = nullptr) {
    if (cfg.methods.empty()) throw ConfigError("sweep: no methods selected");
    if (cfg.annotation_levels.empty()) throw ConfigError("sweep: no annotation levels");
    if (cfg.n_runs < 1) throw ConfigError("sweep: n_runs must be at least 1");

    Dataset local;
    const Dataset* ds = prebuilt;
    if (!ds) {
        local = build_dataset(cfg.benchmark, cfg.dataset_size, cfg.encoder,
                              sweep_dataset_seed(cfg.base_seed), cfg.synsum_priors,
                              cfg.mimic_priors);
        ds = &local;
    }
    const std::size_t n_train = ds->train_indices.size();
    for (int level : cfg.annotation_levels)
        if (level < 1 || static_cast<std::size_t>(level) > n_train)
            throw ConfigError("sweep: annotation level " + std::to_string(level) +
                              " outside [1, " + std::to_string(n_train) + "]");

    std::vector<std::vector<double>> test_phi;
    std::vector<double> test_truth;
    test_phi.reserve(ds->test_indices.size());
    for (std::size_t idx : ds->test_indices) {
        test_phi.push_back(ds->records[idx].phi);
        test_truth.push_back(ds->records[idx].true_cate);
    }

    SweepResult result;
    result.benchmark = ds->benchmark;
    result.sampling = cfg.sampling;
    result.n_runs = cfg.n_runs;
    result.base_seed = cfg.base_seed;
    for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi)
        for (std::size_t li = 0; li < cfg.annotation_levels.size(); ++li)
            for (int run = 0; run < cfg.n_runs; ++run) {
                SweepCell cell;
                cell.method = cfg.methods[mi];
                cell.level = cfg.annotation_levels[li];
                cell.run = run;
                cell.seed = detail::sweep_w_seed(cfg.base_seed, li, run);
                result.cells.push_back(cell);
            }

    auto run_cell = [&](SweepCell& cell) {
        try {
            std::size_t li = 0;
            while (cfg.annotation_levels[li] != cell.level) ++li;
            SamplingPolicy policy;
            if (cfg.sampling == SamplingKind::selective) {
                policy = cfg.selective_policy;
                policy.kind = SamplingKind::selective;
            }
            policy.target_count = cell.level;
            AnnotationDraw draw = draw_annotation(
                *ds, ds->train_indices, policy, detail::sweep_s_seed(cfg.base_seed, li, cell.run));
            TrainSet ts = make_train_set(*ds, &draw.s, &draw.p_s);
            EstimatorConfig est_cfg = cfg.estimator;
            est_cfg.seed = cell.seed;
            auto est = fit_estimator(cell.method, ts, est_cfg);
            std::vector<double> preds = predict_all(*est, test_phi);
            cell.pehe = pehe(preds, test_truth);
        } catch (const std::exception& e) {
            cell.failed = true;
            cell.error = e.what();
        }
    };

    unsigned jobs = cfg.jobs > 0 ? static_cast<unsigned>(cfg.jobs)
                                 : std::max(1u, std::thread::hardware_concurrency());
    jobs = std::min<unsigned>(jobs, result.cells.size());
    if (jobs <= 1) {
        for (auto& cell : result.cells) run_cell(cell);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < jobs; ++w)
            pool.emplace_back([&] {
                for (;;) {
                    std::size_t i = next.fetch_add(1);
                    if (i >= result.cells.size()) return;
                    run_cell(result.cells[i]);
                }
            });
        for (auto& t : pool) t.join();
    }

    for (EstimatorKind method : cfg.methods)
        for (int level : cfg.annotation_levels) {
            SweepAggregate agg;
            agg.method = method;
            agg.level = level;
            std::vector<double> vals;
            for (const auto& cell : result.cells)
                if (cell.method == method && cell.level == level && !cell.failed)
                    vals.push_back(cell.pehe);
            agg.n_ok = static_cast<int>(vals.size());
            if (!vals.empty()) {
                double mean = 0.0;
                for (double v : vals) mean += v;
                mean /= vals.size();
                agg.mean_pehe = mean;
                if (vals.size() > 1) {
                    double ss = 0.0;
                    for (double v : vals) ss += (v - mean) * (v - mean);
                    double sd = std::sqrt(ss / (vals.size() - 1));
                    agg.ci_halfwidth = 1.96 * sd / std::sqrt(static_cast<double>(vals.size()));
                }
            }
            result.aggregates.push_back(agg);
        }
    for (const auto& cell : result.cells) result.any_failed |= cell.failed;
    return result;
}

// Mean predicted effect over the test records matching a ground-truth
// covariate predicate.
struct SubgroupReport {
    double mean_effect = 0.0;
    int count = 0;
};

inline SubgroupReport subgroup_report(const EffectEstimator& est, const Dataset& ds,
                                      const std::function<bool(std::span<const double>)>& pred) {
    SubgroupReport rep;
    double sum = 0.0;
    for (std::size_t idx : ds.test_indices) {
        const Record& r = ds.records[idx];
        if (!pred(r.x)) continue;
        sum += est.predict(r.phi);
        ++rep.count;
    }
    if (rep.count == 0) throw EvalError("subgroup_report: empty subgroup");
    rep.mean_effect = sum / rep.count;
    return rep;
}

// --- Results files -----------------------------------------------------------
//
// Cells CSV: benchmark,sampling,method,level,run,seed,pehe,error
// pehe is empty for failed cells; commas inside error messages become ';'.

inline void write_results_csv(std::ostream& out, const SweepResult& res) {
    out << "benchmark,sampling,method,level,run,seed,pehe,error\n";
    for (const auto& c : res.cells) {
        out << benchmark_name(res.benchmark) << ',' << sampling_name(res.sampling) << ','
            << estimator_name(c.method) << ',' << c.level << ',' << c.run << ',' << c.seed << ',';
        if (!c.failed) out << detail::format_decimal(c.pehe);
        out << ',';
        std::string msg = c.error;
        std::replace(msg.begin(), msg.end(), ',', ';');
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        out << msg << '\n';
    }
}

struct ResultsRow {
    std::string benchmark, sampling, method, error;
    int level = 0, run = 0;
    std::uint64_t seed = 0;
    double pehe = 0.0;
    bool failed = false;
};

inline std::vector<ResultsRow> read_results_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw IoError("results csv: empty file");
    if (detail::split_csv_line(line) !=
        std::vector<std::string>{"benchmark", "sampling", "method", "level", "run", "seed",
                                 "pehe", "error"})
        throw IoError("results csv: unexpected header");
    std::vector<ResultsRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto cells = detail::split_csv_line(line);
        if (cells.size() != 8) throw IoError("results csv: ragged row");
        ResultsRow r;
        r.benchmark = cells[0];
        r.sampling = cells[1];
        r.method = cells[2];
        r.level = static_cast<int>(detail::parse_decimal(cells[3]));
        r.run = static_cast<int>(detail::parse_decimal(cells[4]));
        auto res = std::from_chars(cells[5].data(), cells[5].data() + cells[5].size(), r.seed);
        if (res.ec != std::errc()) throw IoError("results csv: bad seed");
        r.failed = cells[6].empty();
        if (!r.failed) r.pehe = detail::parse_decimal(cells[6]);
        r.error = cells[7];
        rows.push_back(std::move(r));
    }
    if (rows.empty()) throw IoError("results csv: no data rows");
    return rows;
}

}  // namespace catephi
