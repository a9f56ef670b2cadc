#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "catephi/errors.hpp"
#include "catephi/mlp.hpp"
#include "catephi/rng.hpp"

namespace catephi {

enum class Benchmark { synsum, mimic };

inline const char* benchmark_name(Benchmark b) {
    return b == Benchmark::synsum ? "synsum" : "mimic";
}

inline Benchmark benchmark_from_name(const std::string& s) {
    if (s == "synsum") return Benchmark::synsum;
    if (s == "mimic") return Benchmark::mimic;
    throw ConfigError("unknown benchmark: '" + s + "' (expected synsum or mimic)");
}

// Primary-care encounter. Symptoms confound the antibiotics decision and
// the illness duration; the fever level is encoded as two exclusive
// indicators.
struct SynsumCovariates {
    int dysp = 0, cough = 0, pain = 0, nasal = 0;
    int fever_low = 0, fever_high = 0;
    int self_empl = 0, policy = 0;
    int asthma = 0, smoking = 0, copd = 0, hay_fever = 0, winter = 0;
};

// Critical-care admission: demographics plus four diagnosis indicators.
struct MimicCovariates {
    int sex = 0;           // 1 = male
    double age_norm = 0.0; // in [0,1]
    int hyp = 0, cor = 0, art = 0, con = 0;
};

// --- SynSUM treatment/outcome laws -------------------------------------

inline double synsum_propensity(const SynsumCovariates& c) {
    return sigmoid(-3.0 + 1.0 * c.policy + 0.8 * c.dysp + 0.665 * c.cough + 0.665 * c.pain +
                   0.9 * c.fever_low + 2.25 * c.fever_high);
}

// Poisson rate for the illness duration under treatment t.
inline double synsum_lambda(const SynsumCovariates& c, int t) {
    if (t == 0)
        return std::exp(0.010 + 0.64 * c.dysp + 0.35 * c.cough + 0.47 * c.pain +
                        0.011 * c.nasal + 0.81 * c.fever_low + 1.23 * c.fever_high -
                        0.5 * c.self_empl);
    return std::exp(0.16 + 0.51 * c.dysp + 0.42 * c.cough + 0.26 * c.pain +
                    0.0051 * c.nasal + 0.24 * c.fever_low + 0.57 * c.fever_high -
                    0.5 * c.self_empl);
}

inline double synsum_true_cate(const SynsumCovariates& c) {
    return synsum_lambda(c, 1) - synsum_lambda(c, 0);
}

// --- MIMIC treatment/outcome laws ---------------------------------------

inline double mimic_propensity(const MimicCovariates& c) {
    return sigmoid(0.9 * c.sex + 0.9 * c.age_norm + c.hyp + c.cor + c.art + c.con);
}

inline double mimic_outcome_mean(const MimicCovariates& c, int t) {
    return 0.9 * c.sex + 0.9 * c.age_norm + c.hyp + c.cor + c.art + c.con + 1.3 * t -
           6.3 * t * c.sex * (1 - c.hyp);
}

inline double mimic_true_cate(const MimicCovariates& c) {
    return 1.3 - 6.3 * c.sex * (1 - c.hyp);
}

// --- Covariate priors ----------------------------------------------------
//
// The treatment, outcome, and effect laws above fully determine estimator
// correctness; the priors below only shape the population and are chosen to
// keep both treatment arms and all strata populated.

struct SynsumPriors {
    double asthma = 0.1, smoking = 0.25, copd = 0.05, hay_fever = 0.1, winter = 0.5;
    double policy = 0.5, self_empl = 0.2;
    // Symptom logits: intercept plus weights on background indicators.
    double dysp_bias = -1.5, dysp_asthma = 1.2, dysp_smoking = 0.8, dysp_copd = 1.5;
    double cough_bias = -1.0, cough_smoking = 0.6, cough_copd = 0.8, cough_winter = 0.5;
    double pain_bias = -1.8, pain_smoking = 0.4;
    double nasal_bias = -1.2, nasal_hay_fever = 1.5, nasal_winter = 0.7;
    // Three-level fever drawn as one categorical.
    double fever_none = 0.6, fever_low = 0.25, fever_high = 0.15;
};

struct MimicPriors {
    double sex = 0.5;
    double hyp = 0.4, cor = 0.3, art = 0.25, con = 0.25;
    // Shared latent severity tilts all four diagnoses together.
    double severity_coef = 0.5;
};

struct SynsumDraw {
    SynsumCovariates x;
    int t = 0;
    double y = 0.0;
    double true_cate = 0.0;
};

struct MimicDraw {
    MimicCovariates x;
    int t = 0;
    double y = 0.0;
    double true_cate = 0.0;
};

inline SynsumCovariates synsum_draw_covariates(Rng& rng, const SynsumPriors& pri) {
    SynsumCovariates c;
    c.asthma = rng.bernoulli(pri.asthma);
    c.smoking = rng.bernoulli(pri.smoking);
    c.copd = rng.bernoulli(pri.copd);
    c.hay_fever = rng.bernoulli(pri.hay_fever);
    c.winter = rng.bernoulli(pri.winter);
    c.policy = rng.bernoulli(pri.policy);
    c.self_empl = rng.bernoulli(pri.self_empl);
    c.dysp = rng.bernoulli(
        sigmoid(pri.dysp_bias + pri.dysp_asthma * c.asthma + pri.dysp_smoking * c.smoking +
                pri.dysp_copd * c.copd));
    c.cough = rng.bernoulli(sigmoid(pri.cough_bias + pri.cough_smoking * c.smoking +
                                    pri.cough_copd * c.copd + pri.cough_winter * c.winter));
    c.pain = rng.bernoulli(sigmoid(pri.pain_bias + pri.pain_smoking * c.smoking));
    c.nasal = rng.bernoulli(sigmoid(pri.nasal_bias + pri.nasal_hay_fever * c.hay_fever +
                                    pri.nasal_winter * c.winter));
    double u = rng.uniform01();
    double total = pri.fever_none + pri.fever_low + pri.fever_high;
    if (u < pri.fever_low / total)
        c.fever_low = 1;
    else if (u < (pri.fever_low + pri.fever_high) / total)
        c.fever_high = 1;
    return c;
}

inline std::vector<SynsumDraw> synsum_sample(int n, std::uint64_t seed,
                                             const SynsumPriors& pri = {}) {
    if (n < 1) throw ConfigError("synsum_sample: n must be at least 1");
    std::vector<SynsumDraw> out(n);
    Rng rng(derive_seed(seed, 0x51));
    for (auto& d : out) {
        d.x = synsum_draw_covariates(rng, pri);
        d.t = rng.bernoulli(synsum_propensity(d.x)) ? 1 : 0;
        d.y = static_cast<double>(rng.poisson(synsum_lambda(d.x, d.t)));
        d.true_cate = synsum_true_cate(d.x);
    }
    return out;
}

inline MimicCovariates mimic_draw_covariates(Rng& rng, const MimicPriors& pri) {
    MimicCovariates c;
    c.sex = rng.bernoulli(pri.sex);
    c.age_norm = rng.uniform01();
    double severity = rng.normal();
    auto logit = [](double p) { return std::log(p / (1.0 - p)); };
    auto diag = [&](double p) {
        return rng.bernoulli(sigmoid(logit(p) + pri.severity_coef * severity)) ? 1 : 0;
    };
    c.hyp = diag(pri.hyp);
    c.cor = diag(pri.cor);
    c.art = diag(pri.art);
    c.con = diag(pri.con);
    return c;
}

inline std::vector<MimicDraw> mimic_sample(int n, std::uint64_t seed,
                                           const MimicPriors& pri = {}) {
    if (n < 1) throw ConfigError("mimic_sample: n must be at least 1");
    std::vector<MimicDraw> out(n);
    Rng rng(derive_seed(seed, 0x52));
    for (auto& d : out) {
        d.x = mimic_draw_covariates(rng, pri);
        d.t = rng.bernoulli(mimic_propensity(d.x)) ? 1 : 0;
        d.y = mimic_outcome_mean(d.x, d.t) + rng.normal();
        d.true_cate = mimic_true_cate(d.x);
    }
    return out;
}

// --- Covariate schema ------------------------------------------------------
//
// Layout of the estimator-visible covariate vector x, of the covariates the
// encoder embeds, and of the always-observed background slice appended to
// the representation.

struct CovariateSchema {
    Benchmark benchmark;
    std::vector<std::string> x_names;        // estimator-visible covariate vector
    std::vector<bool> x_binary;              // per x entry
    int fever_low_idx = -1, fever_high_idx = -1;  // exclusive pair, -1 if none
    std::vector<std::string> embedded_names; // covariates carried by the embedding
    std::vector<std::string> background_names;
};

inline const CovariateSchema& schema_for(Benchmark b) {
    static const CovariateSchema synsum{
        Benchmark::synsum,
        {"dysp", "cough", "pain", "nasal", "fever_low", "fever_high", "self_empl"},
        {true, true, true, true, true, true, true},
        4,
        5,
        {"dysp", "cough", "pain", "nasal", "fever_low", "fever_high"},
        {"self_empl", "asthma", "smoking", "copd", "winter", "hay_fever"},
    };
    static const CovariateSchema mimic{
        Benchmark::mimic,
        {"sex", "age", "hyp", "cor", "art", "con"},
        {true, false, true, true, true, true},
        -1,
        -1,
        {"hyp", "cor", "art", "con"},
        {"sex", "age"},
    };
    return b == Benchmark::synsum ? synsum : mimic;
}

inline std::vector<double> synsum_x_vector(const SynsumCovariates& c) {
    return {static_cast<double>(c.dysp),      static_cast<double>(c.cough),
            static_cast<double>(c.pain),      static_cast<double>(c.nasal),
            static_cast<double>(c.fever_low), static_cast<double>(c.fever_high),
            static_cast<double>(c.self_empl)};
}

inline std::vector<double> synsum_embedded_vector(const SynsumCovariates& c) {
    return {static_cast<double>(c.dysp),      static_cast<double>(c.cough),
            static_cast<double>(c.pain),      static_cast<double>(c.nasal),
            static_cast<double>(c.fever_low), static_cast<double>(c.fever_high)};
}

inline std::vector<double> synsum_background_vector(const SynsumCovariates& c) {
    return {static_cast<double>(c.self_empl), static_cast<double>(c.asthma),
            static_cast<double>(c.smoking),   static_cast<double>(c.copd),
            static_cast<double>(c.winter),    static_cast<double>(c.hay_fever)};
}

inline std::vector<double> mimic_x_vector(const MimicCovariates& c) {
    return {static_cast<double>(c.sex), c.age_norm,
            static_cast<double>(c.hyp), static_cast<double>(c.cor),
            static_cast<double>(c.art), static_cast<double>(c.con)};
}

inline std::vector<double> mimic_embedded_vector(const MimicCovariates& c) {
    return {static_cast<double>(c.hyp), static_cast<double>(c.cor),
            static_cast<double>(c.art), static_cast<double>(c.con)};
}

inline std::vector<double> mimic_background_vector(const MimicCovariates& c) {
    return {static_cast<double>(c.sex), c.age_norm};
}

// True CATE as a function of the estimator-visible covariate vector.
inline double true_cate_from_x(Benchmark b, std::span<const double> x) {
    if (b == Benchmark::synsum) {
        SynsumCovariates c;
        c.dysp = static_cast<int>(x[0]);
        c.cough = static_cast<int>(x[1]);
        c.pain = static_cast<int>(x[2]);
        c.nasal = static_cast<int>(x[3]);
        c.fever_low = static_cast<int>(x[4]);
        c.fever_high = static_cast<int>(x[5]);
        c.self_empl = static_cast<int>(x[6]);
        return synsum_true_cate(c);
    }
    MimicCovariates c;
    c.sex = static_cast<int>(x[0]);
    c.age_norm = x[1];
    c.hyp = static_cast<int>(x[2]);
    c.cor = static_cast<int>(x[3]);
    c.art = static_cast<int>(x[4]);
    c.con = static_cast<int>(x[5]);
    return mimic_true_cate(c);
}

}  // namespace catephi
