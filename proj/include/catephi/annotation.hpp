#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "catephi/dataset.hpp"
#include "catephi/errors.hpp"
#include "catephi/rng.hpp"

namespace catephi {

enum class SamplingKind { random, selective };

inline const char* sampling_name(SamplingKind k) {
    return k == SamplingKind::random ? "random" : "selective";
}

inline SamplingKind sampling_from_name(const std::string& s) {
    if (s == "random") return SamplingKind::random;
    if (s == "selective") return SamplingKind::selective;
    throw ConfigError("unknown sampling kind: '" + s + "'");
}

// How annotation flags are drawn. Selective policies key an unscaled base
// probability on a bit pattern of background variables; the pattern must be
// computable from the background slice of phi alone, which is what makes
// the mechanism known at estimation time.
struct SamplingPolicy {
    SamplingKind kind = SamplingKind::random;
    int target_count = 0;
    std::vector<std::string> stratum_vars;      // background variable names
    std::map<std::string, double> base_prob;    // "010" -> probability

    // Base probability for one record, read off the background slice of phi.
    double base_prob_for(std::span<const double> phi, const CovariateSchema& schema) const {
        if (kind == SamplingKind::random) return 1.0;
        std::size_t bg_dim = schema.background_names.size();
        if (phi.size() < bg_dim) throw DimensionError("phi shorter than its background slice");
        std::span<const double> bg = phi.subspan(phi.size() - bg_dim);
        std::string key;
        key.reserve(stratum_vars.size());
        for (const auto& var : stratum_vars) {
            auto it = std::find(schema.background_names.begin(), schema.background_names.end(), var);
            if (it == schema.background_names.end())
                throw ConfigError("stratum variable '" + var + "' is not a background variable");
            double v = bg[it - schema.background_names.begin()];
            key += v != 0.0 ? '1' : '0';
        }
        auto it = base_prob.find(key);
        if (it == base_prob.end())
            throw ConfigError("no base probability for stratum key '" + key + "'");
        if (it->second <= 0.0 || it->second > 1.0)
            throw ConfigError("base probability for stratum '" + key + "' must be in (0,1]");
        return it->second;
    }
};

inline SamplingPolicy synsum_selective_policy(int target_count = 0) {
    SamplingPolicy p;
    p.kind = SamplingKind::selective;
    p.target_count = target_count;
    p.stratum_vars = {"winter", "copd", "asthma"};
    p.base_prob = {{"000", 0.80}, {"001", 0.15}, {"010", 0.15}, {"100", 0.12},
                   {"011", 0.08}, {"101", 0.08}, {"110", 0.08}, {"111", 0.05}};
    return p;
}

inline SamplingPolicy mimic_selective_policy(int target_count = 0) {
    SamplingPolicy p;
    p.kind = SamplingKind::selective;
    p.target_count = target_count;
    p.stratum_vars = {"sex"};
    p.base_prob = {{"0", 0.75}, {"1", 0.15}};  // females annotated more often
    return p;
}

// Solves for the scaling factor delta such that sum_i min(p_i/delta, 1)
// equals target_count (within 0.5). The sum is continuous and
// non-increasing in delta, so bisection applies; the lower bracket is
// widened below max(p) when clipping at 1 is needed to reach the target.
inline double solve_delta(std::span<const double> base_probs, int target_count) {
    const std::size_t n = base_probs.size();
    if (target_count <= 0) throw PolicyError("solve_delta: target_count must be positive");
    if (static_cast<std::size_t>(target_count) > n)
        throw PolicyError("solve_delta: target " + std::to_string(target_count) +
                          " exceeds the " + std::to_string(n) + " available records");
    double sum = 0.0, maxp = 0.0, minpos = 1.0;
    std::size_t n_pos = 0;
    for (double p : base_probs) {
        if (p < 0.0 || p > 1.0) throw PolicyError("solve_delta: base probabilities must be in [0,1]");
        sum += p;
        maxp = std::max(maxp, p);
        if (p > 0.0) {
            minpos = std::min(minpos, p);
            ++n_pos;
        }
    }
    if (static_cast<std::size_t>(target_count) > n_pos)
        throw PolicyError("solve_delta: target exceeds the records with positive base probability");

    auto expected = [&](double delta) {
        double e = 0.0;
        for (double p : base_probs) e += std::min(p / delta, 1.0);
        return e;
    };

    double lo = maxp;
    double hi = sum / target_count;
    if (expected(lo) < target_count)
        lo = minpos / (2.0 * static_cast<double>(n));  // everything clips to 1 here
    if (hi <= lo) hi = lo * 2.0 + 1.0;

    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        if (expected(mid) >= target_count)
            lo = mid;
        else
            hi = mid;
    }
    double delta = 0.5 * (lo + hi);
    if (std::abs(expected(delta) - target_count) > 0.5)
        throw PolicyError("solve_delta: bisection failed to meet the target");
    return delta;
}

struct AnnotationDraw {
    double delta = 1.0;
    std::vector<int> s;        // one entry per dataset record; 0 outside the subset
    std::vector<double> p_s;   // probability used for the draw, 0 outside the subset
    int realized_count = 0;
};

// Draws S ~ Bernoulli(min(p_i/delta, 1)) independently over the given
// subset of records and keeps the per-record probability (the known
// sampling mechanism handed to downstream estimators).
inline AnnotationDraw draw_annotation(const Dataset& ds, std::span<const std::size_t> subset,
                                      const SamplingPolicy& policy, std::uint64_t seed) {
    const auto& schema = ds.schema();
    if (policy.target_count > static_cast<int>(subset.size()))
        throw PolicyError("annotation target exceeds the number of eligible records");
    std::vector<double> base(subset.size());
    for (std::size_t k = 0; k < subset.size(); ++k)
        base[k] = policy.base_prob_for(ds.records[subset[k]].phi, schema);

    AnnotationDraw out;
    out.delta = solve_delta(base, policy.target_count);
    out.s.assign(ds.records.size(), 0);
    out.p_s.assign(ds.records.size(), 0.0);
    Rng rng(derive_seed(seed, 0xA5));
    for (std::size_t k = 0; k < subset.size(); ++k) {
        double p = std::min(base[k] / out.delta, 1.0);
        out.p_s[subset[k]] = p;
        if (rng.bernoulli(p)) {
            out.s[subset[k]] = 1;
            ++out.realized_count;
        }
    }
    return out;
}

// In-place annotation of the training split.
inline AnnotationDraw assign_s(Dataset& ds, const SamplingPolicy& policy, std::uint64_t seed) {
    AnnotationDraw draw = draw_annotation(ds, ds.train_indices, policy, seed);
    for (std::size_t i = 0; i < ds.records.size(); ++i) {
        ds.records[i].s = draw.s[i];
        ds.records[i].p_s = draw.p_s[i];
    }
    return draw;
}

}  // namespace catephi
