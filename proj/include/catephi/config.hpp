#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "catephi/annotation.hpp"
#include "catephi/errors.hpp"
#include "catephi/eval.hpp"

namespace catephi {

using ordered_json = nlohmann::ordered_json;

// Paper-grid annotation levels; the MIMIC counts are scaled down when the
// synthetic dataset is smaller than the source cohort.
inline std::vector<int> default_annotation_levels(Benchmark b, double mimic_scale) {
    if (b == Benchmark::synsum) return {4400, 2200, 1100, 730, 550, 400, 315, 220};
    std::vector<int> levels;
    for (int base : {16000, 8000, 4000, 2650, 2000, 1450, 1150, 800})
        levels.push_back(static_cast<int>(std::lround(base * mimic_scale)));
    return levels;
}

// Everything one experiment needs, parsed from a single JSON config file.
struct ExperimentConfig {
    Benchmark benchmark = Benchmark::synsum;
    int dataset_size = 10000;
    std::uint64_t seed = 0;
    EncoderConfig encoder;
    SamplingKind sampling = SamplingKind::random;
    SamplingPolicy selective_policy;
    std::vector<int> annotation_levels;
    std::vector<EstimatorKind> methods;
    int n_runs = 5;
    int jobs = 0;
    double mimic_level_scale = 0.25;
    EstimatorConfig estimator;

    SweepConfig sweep_config() const {
        SweepConfig sc;
        sc.benchmark = benchmark;
        sc.sampling = sampling;
        sc.annotation_levels = annotation_levels;
        sc.methods = methods;
        sc.n_runs = n_runs;
        sc.base_seed = seed;
        sc.dataset_size = dataset_size;
        sc.encoder = encoder;
        sc.estimator = estimator;
        sc.selective_policy = selective_policy;
        sc.jobs = jobs;
        return sc;
    }
};

namespace detail {

inline void reject_unknown_keys(const ordered_json& obj, const std::vector<std::string>& known,
                                const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (std::find(known.begin(), known.end(), it.key()) == known.end())
            throw ConfigError("config: unknown key '" + it.key() + "' in " + where);
}

template <typename T>
inline T get_or(const ordered_json& obj, const std::string& key, T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("config: field '" + key + "' has the wrong type");
    }
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(const ordered_json& j) {
    if (!j.is_object()) throw ConfigError("config: top level must be an object");
    detail::reject_unknown_keys(j, {"benchmark", "dataset_size", "seed", "encoder", "sampling",
                                    "sweep", "train", "estimator", "mimic_level_scale"},
                                "top level");
    ExperimentConfig cfg;
    cfg.benchmark = benchmark_from_name(detail::get_or<std::string>(j, "benchmark", "synsum"));
    cfg.dataset_size = detail::get_or<int>(j, "dataset_size", 10000);
    cfg.seed = detail::get_or<std::uint64_t>(j, "seed", 0);
    cfg.mimic_level_scale = detail::get_or<double>(j, "mimic_level_scale", 0.25);
    if (cfg.dataset_size < 10) throw ConfigError("config: dataset_size must be at least 10");

    const auto& schema = schema_for(cfg.benchmark);
    int k = static_cast<int>(schema.embedded_names.size());

    if (j.contains("encoder")) {
        const auto& e = j.at("encoder");
        detail::reject_unknown_keys(e, {"embed_dim", "noise_std", "record_prob", "encoder_seed"},
                                    "encoder");
        cfg.encoder.embed_dim = detail::get_or<int>(e, "embed_dim", 64);
        cfg.encoder.noise_std = detail::get_or<double>(e, "noise_std", 0.1);
        if (e.contains("record_prob")) {
            const auto& rp = e.at("record_prob");
            if (rp.is_number())
                cfg.encoder.record_prob.assign(k, rp.get<double>());
            else if (rp.is_array())
                cfg.encoder.record_prob = rp.get<std::vector<double>>();
            else
                throw ConfigError("config: encoder.record_prob must be a number or array");
        }
        if (e.contains("encoder_seed"))
            cfg.encoder.encoder_seed = e.at("encoder_seed").get<std::uint64_t>();
        else
            cfg.encoder.encoder_seed = derive_seed(cfg.seed, 0xE5);
    } else {
        cfg.encoder.encoder_seed = derive_seed(cfg.seed, 0xE5);
    }
    if (cfg.encoder.record_prob.empty()) cfg.encoder.record_prob.assign(k, 1.0);
    if (static_cast<int>(cfg.encoder.record_prob.size()) != k)
        throw ConfigError("config: encoder.record_prob needs " + std::to_string(k) + " entries");

    cfg.selective_policy = cfg.benchmark == Benchmark::synsum ? synsum_selective_policy()
                                                              : mimic_selective_policy();
    if (j.contains("sampling")) {
        const auto& s = j.at("sampling");
        detail::reject_unknown_keys(s, {"kind", "strata", "table", "estimate_prob"}, "sampling");
        cfg.sampling = sampling_from_name(detail::get_or<std::string>(s, "kind", "random"));
        if (detail::get_or<bool>(s, "estimate_prob", false))
            throw ConfigError("config: sampling.estimate_prob is not supported; the sampling "
                              "mechanism P(S=1|phi) is assumed known");
        if (s.contains("strata")) {
            cfg.selective_policy.stratum_vars = s.at("strata").get<std::vector<std::string>>();
            if (!s.contains("table"))
                throw ConfigError("config: sampling.strata requires sampling.table");
        }
        if (s.contains("table")) {
            cfg.selective_policy.base_prob.clear();
            for (auto it = s.at("table").begin(); it != s.at("table").end(); ++it) {
                const std::string& key = it.key();
                if (key.size() != cfg.selective_policy.stratum_vars.size() ||
                    key.find_first_not_of("01") != std::string::npos)
                    throw ConfigError("config: sampling.table key '" + key +
                                      "' must be a 0/1 pattern over the strata");
                cfg.selective_policy.base_prob[key] = it.value().get<double>();
            }
        }
    }

    cfg.annotation_levels = default_annotation_levels(cfg.benchmark, cfg.mimic_level_scale);
    cfg.methods = {EstimatorKind::plug_in, EstimatorKind::info_extraction,
                   EstimatorKind::direct_regression, EstimatorKind::adjusted};
    if (j.contains("sweep")) {
        const auto& s = j.at("sweep");
        detail::reject_unknown_keys(s, {"annotation_levels", "methods", "n_runs", "jobs"}, "sweep");
        if (s.contains("annotation_levels"))
            cfg.annotation_levels = s.at("annotation_levels").get<std::vector<int>>();
        if (s.contains("methods")) {
            cfg.methods.clear();
            for (const auto& m : s.at("methods"))
                cfg.methods.push_back(estimator_from_name(m.get<std::string>()));
        }
        cfg.n_runs = detail::get_or<int>(s, "n_runs", 5);
        cfg.jobs = detail::get_or<int>(s, "jobs", 0);
    }

    if (j.contains("train")) {
        const auto& t = j.at("train");
        detail::reject_unknown_keys(t, {"epochs", "batch_size", "lr0", "decay", "optimizer"},
                                    "train");
        cfg.estimator.train.epochs = detail::get_or<int>(t, "epochs", 30);
        cfg.estimator.train.batch_size = detail::get_or<int>(t, "batch_size", 256);
        cfg.estimator.train.lr0 = detail::get_or<double>(t, "lr0", 5e-3);
        cfg.estimator.train.decay = detail::get_or<double>(t, "decay", 0.9);
        std::string opt = detail::get_or<std::string>(t, "optimizer", "adam");
        if (opt == "adam")
            cfg.estimator.train.optimizer = OptimizerKind::adam;
        else if (opt == "sgd")
            cfg.estimator.train.optimizer = OptimizerKind::sgd;
        else
            throw ConfigError("config: train.optimizer must be adam or sgd");
    }

    if (j.contains("estimator")) {
        const auto& e = j.at("estimator");
        detail::reject_unknown_keys(e, {"hidden_dim", "clip_eps", "p_s_floor", "mc_draws",
                                        "instability_threshold", "instability_mitigation"},
                                    "estimator");
        cfg.estimator.hidden_dim = detail::get_or<int>(e, "hidden_dim", 32);
        cfg.estimator.clip_eps = detail::get_or<double>(e, "clip_eps", 0.01);
        cfg.estimator.p_s_floor = detail::get_or<double>(e, "p_s_floor", 0.005);
        cfg.estimator.mc_draws = detail::get_or<int>(e, "mc_draws", 128);
        cfg.estimator.instability_threshold = detail::get_or<int>(e, "instability_threshold", 750);
        cfg.estimator.instability_mitigation =
            detail::get_or<bool>(e, "instability_mitigation", true);
    }
    cfg.estimator.seed = cfg.seed;
    return cfg;
}

inline ExperimentConfig parse_experiment_config(const std::string& text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    return parse_experiment_config(j);
}

// Fully-resolved config: every effective value spelled out. Re-parsing the
// emitted object yields an equal config.
inline ordered_json resolved_config_json(const ExperimentConfig& cfg) {
    ordered_json j;
    j["benchmark"] = benchmark_name(cfg.benchmark);
    j["dataset_size"] = cfg.dataset_size;
    j["seed"] = cfg.seed;
    j["mimic_level_scale"] = cfg.mimic_level_scale;
    j["encoder"] = {{"embed_dim", cfg.encoder.embed_dim},
                    {"noise_std", cfg.encoder.noise_std},
                    {"record_prob", cfg.encoder.record_prob},
                    {"encoder_seed", cfg.encoder.encoder_seed}};
    ordered_json table = ordered_json::object();
    for (const auto& [key, prob] : cfg.selective_policy.base_prob) table[key] = prob;
    j["sampling"] = {{"kind", sampling_name(cfg.sampling)},
                     {"strata", cfg.selective_policy.stratum_vars},
                     {"table", table},
                     {"estimate_prob", false}};
    std::vector<std::string> methods;
    for (auto m : cfg.methods) methods.emplace_back(estimator_name(m));
    j["sweep"] = {{"annotation_levels", cfg.annotation_levels},
                  {"methods", methods},
                  {"n_runs", cfg.n_runs},
                  {"jobs", cfg.jobs}};
    j["train"] = {{"epochs", cfg.estimator.train.epochs},
                  {"batch_size", cfg.estimator.train.batch_size},
                  {"lr0", cfg.estimator.train.lr0},
                  {"decay", cfg.estimator.train.decay},
                  {"optimizer",
                   cfg.estimator.train.optimizer == OptimizerKind::adam ? "adam" : "sgd"}};
    j["estimator"] = {{"hidden_dim", cfg.estimator.hidden_dim},
                      {"clip_eps", cfg.estimator.clip_eps},
                      {"p_s_floor", cfg.estimator.p_s_floor},
                      {"mc_draws", cfg.estimator.mc_draws},
                      {"instability_threshold", cfg.estimator.instability_threshold},
                      {"instability_mitigation", cfg.estimator.instability_mitigation}};
    return j;
}

}  // namespace catephi
