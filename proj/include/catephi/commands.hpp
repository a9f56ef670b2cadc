#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "catephi/config.hpp"
#include "catephi/dataset.hpp"
#include "catephi/eval.hpp"
#include "catephi/plot.hpp"

namespace catephi {

namespace detail {

inline std::string read_text_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot read " + p.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline void write_text_file(const std::filesystem::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw IoError("cannot write " + p.string());
    out << content;
    if (!out) throw IoError("write failed for " + p.string());
}

}  // namespace detail

inline ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    return parse_experiment_config(detail::read_text_file(path));
}

inline Dataset dataset_from_config(const ExperimentConfig& cfg) {
    return build_dataset(cfg.benchmark, cfg.dataset_size, cfg.encoder,
                         sweep_dataset_seed(cfg.seed));
}

// Writes dataset.csv (estimator-visible columns), covariates.csv (ground
// truth, so annotation can be redrawn after reloading), split.csv,
// encoder.mat, and the resolved config.
inline int cmd_generate(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                        std::ostream& log = std::cout) {
    std::filesystem::create_directories(out_dir);
    Dataset ds = dataset_from_config(cfg);

    std::ostringstream data;
    write_dataset_csv(data, ds);
    detail::write_text_file(out_dir / "dataset.csv", data.str());

    std::ostringstream cov;
    write_covariates_csv(cov, ds);
    detail::write_text_file(out_dir / "covariates.csv", cov.str());

    std::ostringstream split;
    write_split_csv(split, ds);
    detail::write_text_file(out_dir / "split.csv", split.str());

    std::ostringstream enc;
    save_matrix(enc, ds.encoder.projection());
    detail::write_text_file(out_dir / "encoder.mat", enc.str());

    detail::write_text_file(out_dir / "resolved_config.json",
                            resolved_config_json(cfg).dump(2) + "\n");

    log << "wrote " << ds.records.size() << " records (" << ds.train_indices.size() << " train, "
        << ds.test_indices.size() << " test) to " << out_dir.string() << "\n";
    return 0;
}

inline Dataset load_dataset_dir(const std::filesystem::path& dir) {
    std::ifstream data(dir / "dataset.csv");
    if (!data) throw IoError("missing dataset: " + (dir / "dataset.csv").string());
    std::ifstream split(dir / "split.csv");
    if (!split) throw IoError("missing split file: " + (dir / "split.csv").string());
    std::ifstream cov(dir / "covariates.csv");
    if (cov) return read_dataset_csv(data, split, &cov);
    return read_dataset_csv(data, split, nullptr);
}

// Runs the sweep and writes results.csv, summary.json, and the resolved
// config. Returns 1 when any cell failed.
inline int cmd_sweep(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                     const std::optional<std::filesystem::path>& data_dir = std::nullopt,
                     std::ostream& log = std::cout) {
    std::filesystem::create_directories(out_dir);
    SweepResult res;
    if (data_dir) {
        Dataset ds = load_dataset_dir(*data_dir);
        res = run_sweep(cfg.sweep_config(), &ds);
    } else {
        res = run_sweep(cfg.sweep_config());
    }

    std::ostringstream cells;
    write_results_csv(cells, res);
    detail::write_text_file(out_dir / "results.csv", cells.str());

    ordered_json summary;
    summary["schema_version"] = 1;
    summary["benchmark"] = benchmark_name(res.benchmark);
    summary["sampling"] = sampling_name(res.sampling);
    summary["n_runs"] = res.n_runs;
    summary["base_seed"] = res.base_seed;
    summary["aggregates"] = ordered_json::array();
    for (const auto& a : res.aggregates)
        summary["aggregates"].push_back({{"method", estimator_name(a.method)},
                                         {"level", a.level},
                                         {"mean_pehe", a.mean_pehe},
                                         {"ci95_halfwidth", a.ci_halfwidth},
                                         {"n_ok", a.n_ok}});
    summary["failures"] = ordered_json::array();
    for (const auto& c : res.cells)
        if (c.failed)
            summary["failures"].push_back({{"method", estimator_name(c.method)},
                                           {"level", c.level},
                                           {"run", c.run},
                                           {"error", c.error}});
    detail::write_text_file(out_dir / "summary.json", summary.dump(2) + "\n");
    detail::write_text_file(out_dir / "resolved_config.json",
                            resolved_config_json(cfg).dump(2) + "\n");

    for (const auto& a : res.aggregates)
        log << benchmark_name(res.benchmark) << ' ' << sampling_name(res.sampling) << ' '
            << estimator_name(a.method) << " level=" << a.level
            << " pehe=" << detail::format_decimal(a.mean_pehe)
            << " ci=" << detail::format_decimal(a.ci_halfwidth) << " n=" << a.n_ok << "\n";
    if (res.any_failed) {
        log << "sweep finished with failed cells (see summary.json)\n";
        return 1;
    }
    return 0;
}

// Renders one SVG per (benchmark, sampling) panel in the results file. With
// a single panel the output lands exactly at out_path; otherwise the panel
// key is appended to the stem.
inline int cmd_plot(const std::filesystem::path& results_path,
                    const std::filesystem::path& out_path, std::ostream& log = std::cout) {
    std::ifstream in(results_path);
    if (!in) throw IoError("cannot read " + results_path.string());
    auto rows = read_results_csv(in);
    auto panels = collect_panels(rows);
    if (panels.empty()) throw IoError("results csv: nothing to plot");
    for (const auto& panel : panels) {
        std::filesystem::path target = out_path;
        if (panels.size() > 1) {
            target = out_path;
            target.replace_filename(out_path.stem().string() + "_" + panel.benchmark + "_" +
                                    panel.sampling + out_path.extension().string());
        }
        detail::write_text_file(target, render_panel_svg(panel));
        log << "wrote " << target.string() << "\n";
    }
    return 0;
}

// Prints a short human-readable summary of a dataset directory, a results
// file, or a saved estimator directory.
inline int cmd_inspect(const std::filesystem::path& path, std::ostream& log = std::cout) {
    if (std::filesystem::is_directory(path) && std::filesystem::exists(path / "dataset.csv")) {
        Dataset ds = load_dataset_dir(path);
        int annotated = 0;
        for (const auto& r : ds.records) annotated += r.s;
        log << "dataset: " << benchmark_name(ds.benchmark) << ", " << ds.records.size()
            << " records, phi_dim=" << ds.phi_dim() << ", train=" << ds.train_indices.size()
            << ", test=" << ds.test_indices.size() << ", annotated=" << annotated << "\n";
        return 0;
    }
    if (std::filesystem::is_directory(path) && std::filesystem::exists(path / "manifest.txt")) {
        auto est = load_estimator(path);
        log << "estimator: " << estimator_name(est->kind()) << "\n";
        return 0;
    }
    if (std::filesystem::is_regular_file(path)) {
        std::ifstream in(path);
        auto rows = read_results_csv(in);
        auto panels = collect_panels(rows);
        for (const auto& p : panels) {
            log << "panel " << p.benchmark << "/" << p.sampling << ":\n";
            for (const auto& m : p.methods) {
                auto it = p.series.find(m);
                if (it == p.series.end()) continue;
                for (const auto& [lvl, mc] : it->second)
                    log << "  " << m << " level=" << lvl
                        << " pehe=" << detail::format_decimal(mc.first) << " +-"
                        << detail::format_decimal(mc.second) << "\n";
            }
        }
        return 0;
    }
    throw IoError("nothing inspectable at " + path.string());
}

}  // namespace catephi
