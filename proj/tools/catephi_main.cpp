#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "catephi/catephi.hpp"

namespace {

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> benchmark;
    std::optional<std::string> sampling;
    std::vector<int> levels;
    std::vector<std::string> methods;
    std::optional<int> runs;
    std::optional<int> jobs;
};

void add_override_flags(CLI::App* cmd, Overrides& ov) {
    cmd->add_option("--seed", ov.seed, "Override the config seed");
    cmd->add_option("--benchmark", ov.benchmark, "Override the benchmark (synsum|mimic)");
    cmd->add_option("--sampling", ov.sampling, "Override the sampling kind (random|selective)");
    cmd->add_option("--levels", ov.levels, "Override the annotation levels")->delimiter(',');
    cmd->add_option("--methods", ov.methods, "Override the estimator list")->delimiter(',');
    cmd->add_option("--runs", ov.runs, "Override the number of runs per cell");
    cmd->add_option("--jobs", ov.jobs, "Worker threads (default: available cores)");
}

catephi::ExperimentConfig load_config(const std::string& path, const Overrides& ov) {
    catephi::ordered_json j = catephi::ordered_json::object();
    if (!path.empty()) {
        try {
            j = catephi::ordered_json::parse(catephi::detail::read_text_file(path));
        } catch (const nlohmann::json::exception& e) {
            throw catephi::ConfigError("config: invalid JSON in " + path + ": " + e.what());
        }
    }
    // Benchmark and seed shape downstream defaults, so apply those overrides
    // before parsing.
    if (ov.benchmark) j["benchmark"] = *ov.benchmark;
    if (ov.seed) j["seed"] = *ov.seed;
    catephi::ExperimentConfig cfg = catephi::parse_experiment_config(j);
    if (ov.sampling) cfg.sampling = catephi::sampling_from_name(*ov.sampling);
    if (!ov.levels.empty()) cfg.annotation_levels = ov.levels;
    if (!ov.methods.empty()) {
        cfg.methods.clear();
        for (const auto& m : ov.methods) cfg.methods.push_back(catephi::estimator_from_name(m));
    }
    if (ov.runs) cfg.n_runs = *ov.runs;
    if (ov.jobs) cfg.jobs = *ov.jobs;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Treatment effect estimation from representations of unstructured records"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out", data_dir, results_path, out_file, inspect_path;
    Overrides ov;

    auto* gen = app.add_subcommand("generate", "Generate a synthetic benchmark dataset");
    gen->add_option("--config", config_path, "Experiment config file (JSON)");
    gen->add_option("--out", out_dir, "Output directory");
    add_override_flags(gen, ov);

    auto* sweep = app.add_subcommand("sweep", "Run the PEHE evaluation sweep");
    sweep->add_option("--config", config_path, "Experiment config file (JSON)");
    sweep->add_option("--out", out_dir, "Output directory");
    sweep->add_option("--data", data_dir, "Use a previously generated dataset directory");
    add_override_flags(sweep, ov);

    auto* plot = app.add_subcommand("plot", "Render PEHE curves from a results file");
    plot->add_option("results", results_path, "results.csv from a sweep")->required();
    plot->add_option("--out", out_file, "Output SVG path")->required();

    auto* inspect = app.add_subcommand("inspect", "Summarize a dataset, results, or model");
    inspect->add_option("path", inspect_path, "Path to inspect")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed()) return catephi::cmd_generate(load_config(config_path, ov), out_dir);
        if (sweep->parsed()) {
            std::optional<std::filesystem::path> data;
            if (!data_dir.empty()) data = data_dir;
            return catephi::cmd_sweep(load_config(config_path, ov), out_dir, data);
        }
        if (plot->parsed()) return catephi::cmd_plot(results_path, out_file);
        if (inspect->parsed()) return catephi::cmd_inspect(inspect_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
