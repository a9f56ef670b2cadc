#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "catephi/errors.hpp"
#include "catephi/matrix.hpp"
#include "catephi/rng.hpp"

namespace catephi {

// Synthetic stand-in for a pre-trained text embedder. Present binary
// covariates are recorded with probability record_prob[j] (an unrecorded
// covariate encodes as absent, which is what makes representations lose
// confounding information); the recorded pattern is pushed through a fixed
// seeded random projection and tanh, and Gaussian noise is added.
struct EncoderConfig {
    int embed_dim = 64;
    double noise_std = 0.1;
    std::vector<double> record_prob;  // per embedded covariate; empty = all 1.0
    std::uint64_t encoder_seed = 0;
};

class RepresentationEncoder {
public:
    RepresentationEncoder() = default;

    RepresentationEncoder(const EncoderConfig& cfg, int covariate_count) : cfg_(cfg) {
        if (cfg.embed_dim < 1) throw ConfigError("encoder: embed_dim must be positive");
        if (cfg.noise_std < 0.0) throw ConfigError("encoder: noise_std must be >= 0");
        if (cfg_.record_prob.empty()) {
            cfg_.record_prob.assign(covariate_count, 1.0);
        } else if (static_cast<int>(cfg_.record_prob.size()) != covariate_count) {
            throw ConfigError("encoder: record_prob needs one entry per embedded covariate");
        }
        for (double p : cfg_.record_prob)
            if (p < 0.0 || p > 1.0) throw ConfigError("encoder: record_prob entries must be in [0,1]");

        // The projection depends only on (seed, embed_dim, covariate count),
        // so train and test records share it.
        proj_ = Matrix(cfg.embed_dim, covariate_count);
        Rng rng(derive_seed(cfg.encoder_seed, 0xE2C0DE));
        double scale = 1.0 / std::sqrt(static_cast<double>(std::max(1, covariate_count)));
        for (auto& v : proj_.data) v = scale * rng.normal();
    }

    // Construct around an already-saved projection (dataset import path).
    RepresentationEncoder(const EncoderConfig& cfg, Matrix projection)
        : cfg_(cfg), proj_(std::move(projection)) {
        if (cfg_.record_prob.empty()) cfg_.record_prob.assign(proj_.cols, 1.0);
    }

    int covariate_count() const { return static_cast<int>(proj_.cols); }
    int embed_dim() const { return cfg_.embed_dim; }
    const Matrix& projection() const { return proj_; }
    const EncoderConfig& config() const { return cfg_; }

    // Returns embedding ++ background.
    std::vector<double> encode(std::span<const double> covariates,
                               std::span<const double> background,
                               std::uint64_t record_seed) const {
        if (covariates.size() != proj_.cols)
            throw DimensionError("encode: covariate vector has wrong length");
        Rng rng(derive_seed(record_seed, 0xEC));
        std::vector<double> mask(proj_.cols, 0.0);
        for (std::size_t j = 0; j < proj_.cols; ++j) {
            bool recorded = rng.uniform01() < cfg_.record_prob[j];
            mask[j] = covariates[j] != 0.0 && recorded ? covariates[j] : 0.0;
        }

        std::vector<double> phi;
        phi.reserve(proj_.rows + background.size());
        for (std::size_t i = 0; i < proj_.rows; ++i) {
            double z = 0.0;
            const double* row = proj_.data.data() + i * proj_.cols;
            for (std::size_t j = 0; j < proj_.cols; ++j) z += row[j] * mask[j];
            phi.push_back(std::tanh(z));
        }
        if (cfg_.noise_std > 0.0)
            for (std::size_t i = 0; i < proj_.rows; ++i) phi[i] += cfg_.noise_std * rng.normal();
        phi.insert(phi.end(), background.begin(), background.end());
        return phi;
    }

private:
    EncoderConfig cfg_;
    Matrix proj_;
};

}  // namespace catephi
