#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "catephi/annotation.hpp"
#include "catephi/dataset.hpp"
#include "catephi/errors.hpp"
#include "catephi/mlp.hpp"

namespace catephi {

enum class EstimatorKind { plug_in, info_extraction, direct_regression, adjusted };

inline const char* estimator_name(EstimatorKind k) {
    switch (k) {
        case EstimatorKind::plug_in: return "plug_in";
        case EstimatorKind::info_extraction: return "info_extraction";
        case EstimatorKind::direct_regression: return "direct_regression";
        case EstimatorKind::adjusted: return "adjusted";
    }
    return "?";
}

inline EstimatorKind estimator_from_name(const std::string& s) {
    if (s == "plug_in") return EstimatorKind::plug_in;
    if (s == "info_extraction") return EstimatorKind::info_extraction;
    if (s == "direct_regression") return EstimatorKind::direct_regression;
    if (s == "adjusted") return EstimatorKind::adjusted;
    throw ConfigError("unknown estimator: '" + s + "'");
}

enum class InputSpace { covariates, representation };

struct EstimatorConfig {
    TrainConfig train;
    int hidden_dim = 32;
    double clip_eps = 0.01;        // propensity clip before any division
    double p_s_floor = 0.005;      // floor on P(S=1|phi) before division
    int mc_draws = 128;            // covariate samples per info-extraction predict
    int instability_threshold = 750;  // below this many annotations the adjusted
    bool instability_mitigation = true;  // target regression uses sgd/batch 1024
    std::uint64_t seed = 0;
};

// First-stage models: propensity plus the two outcome regressors, all over
// the same input space.
struct NuisanceSet {
    MlpModel propensity;
    MlpModel mu0;
    MlpModel mu1;
    InputSpace input_space = InputSpace::covariates;
    double clip_eps = 0.01;

    double propensity_at(std::span<const double> in) const {
        return std::clamp(propensity.forward(in), clip_eps, 1.0 - clip_eps);
    }
    double mu_at(int t, std::span<const double> in) const {
        return t == 1 ? mu1.forward(in) : mu0.forward(in);
    }
};

// Doubly robust pseudo-outcome. pi_hat must already be clipped.
inline double dr_pseudo_outcome(int t, double y, double pi_hat, double mu1_hat, double mu0_hat) {
    double tw = static_cast<double>(t) / pi_hat;
    double cw = static_cast<double>(1 - t) / (1.0 - pi_hat);
    return (tw - cw) * y + (1.0 - tw) * mu1_hat - (1.0 - cw) * mu0_hat;
}

// Sampling-bias-adjusted regression target. For unannotated records the
// weighted residual term vanishes and the target is just the base estimate.
inline double adjusted_pseudo_outcome(int s, std::optional<double> delta_x, double tau_hat_phi,
                                      double p_s) {
    if (s == 0) return tau_hat_phi;
    if (!delta_x)
        throw ContractError("adjusted_pseudo_outcome: annotated record without a pseudo-outcome");
    if (p_s <= 0.0 || p_s > 1.0)
        throw ContractError("adjusted_pseudo_outcome: p_s must lie in (0,1]");
    return (*delta_x - tau_hat_phi) / p_s + tau_hat_phi;
}

namespace detail {

inline Matrix rows_to_matrix(std::span<const EstRow> rows, InputSpace space) {
    if (rows.empty()) throw InsufficientDataError("no records to fit on");
    const std::vector<double>& first = space == InputSpace::covariates ? rows[0].x : rows[0].phi;
    Matrix m(rows.size(), first.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const std::vector<double>& v = space == InputSpace::covariates ? rows[i].x : rows[i].phi;
        if (v.size() != m.cols) throw DimensionError("ragged input rows");
        std::copy(v.begin(), v.end(), m.row(i).begin());
    }
    return m;
}

inline MlpModel fit_scalar_model(const Matrix& inputs, std::span<const double> targets, Head head,
                                 LossKind loss, const EstimatorConfig& cfg,
                                 std::uint64_t stream, const TrainConfig* train_override = nullptr) {
    MlpModel model(static_cast<int>(inputs.cols), cfg.hidden_dim, head,
                   derive_seed(cfg.seed, 2 * stream));
    TrainConfig tc = train_override ? *train_override : cfg.train;
    tc.loss = loss;
    tc.seed = derive_seed(cfg.seed, 2 * stream + 1);
    train(model, inputs, targets, tc);
    return model;
}

inline std::vector<EstRow> annotated_rows(const TrainSet& ts) {
    std::vector<EstRow> out;
    for (const auto& r : ts.rows)
        if (r.s == 1) out.push_back(r);
    return out;
}

}  // namespace detail

// Fits the propensity (bce on T) and the two outcome models (mse on Y per
// arm). Covariate-space fitting demands annotated rows; each arm must hold
// at least 10 records.
inline NuisanceSet fit_nuisances(std::span<const EstRow> rows, InputSpace input_space,
                                 const EstimatorConfig& cfg, std::uint64_t stream_base = 0) {
    if (input_space == InputSpace::covariates)
        for (const auto& r : rows)
            if (r.s != 1)
                throw ContractError("covariate-space nuisances need fully annotated records");

    std::vector<EstRow> arm0, arm1;
    for (const auto& r : rows) (r.t == 1 ? arm1 : arm0).push_back(r);
    if (arm0.size() < 10 || arm1.size() < 10)
        throw InsufficientDataError("need at least 10 records per treatment arm, have " +
                                    std::to_string(arm0.size()) + "/" + std::to_string(arm1.size()));

    Matrix all = detail::rows_to_matrix(rows, input_space);
    std::vector<double> t_targets(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) t_targets[i] = rows[i].t;

    NuisanceSet ns;
    ns.input_space = input_space;
    ns.clip_eps = cfg.clip_eps;
    ns.propensity = detail::fit_scalar_model(all, t_targets, Head::sigmoid,
                                             LossKind::binary_cross_entropy, cfg, stream_base + 0);

    auto fit_mu = [&](std::span<const EstRow> arm, std::uint64_t stream) {
        Matrix in = detail::rows_to_matrix(arm, input_space);
        std::vector<double> ys(arm.size());
        for (std::size_t i = 0; i < arm.size(); ++i) ys[i] = arm[i].y;
        return detail::fit_scalar_model(in, ys, Head::identity, LossKind::mse, cfg, stream);
    };
    ns.mu0 = fit_mu(arm0, stream_base + 1);
    ns.mu1 = fit_mu(arm1, stream_base + 2);
    return ns;
}

inline double nuisance_pseudo_outcome(const NuisanceSet& ns, const EstRow& row,
                                      std::span<const double> in) {
    return dr_pseudo_outcome(row.t, row.y, ns.propensity_at(in), ns.mu1.forward(in),
                             ns.mu0.forward(in));
}

// Effect estimator interface: inference consumes only the representation.
class EffectEstimator {
public:
    virtual ~EffectEstimator() = default;
    virtual EstimatorKind kind() const = 0;
    virtual double predict(std::span<const double> phi) const = 0;
    // Covariate-space nuisances, when this estimator fitted some (used to
    // construct pseudo-outcomes for the sampling-bias adjustment).
    virtual const NuisanceSet* covariate_nuisances() const { return nullptr; }
    virtual void save(const std::filesystem::path& dir) const = 0;
};

inline std::vector<double> predict_all(const EffectEstimator& est,
                                       std::span<const std::vector<double>> phis) {
    std::vector<double> out;
    out.reserve(phis.size());
    for (const auto& phi : phis) out.push_back(est.predict(phi));
    return out;
}

namespace detail {

inline void write_manifest(const std::filesystem::path& dir,
                           const std::vector<std::pair<std::string, std::string>>& entries) {
    std::ofstream out(dir / "manifest.txt");
    if (!out) throw IoError("cannot write " + (dir / "manifest.txt").string());
    for (const auto& [k, v] : entries) out << k << ' ' << v << '\n';
}

inline std::map<std::string, std::string> read_manifest(const std::filesystem::path& dir) {
    std::ifstream in(dir / "manifest.txt");
    if (!in) throw IoError("cannot read " + (dir / "manifest.txt").string());
    std::map<std::string, std::string> out;
    std::string key;
    while (in >> key) {
        std::string value;
        std::getline(in, value);
        if (!value.empty() && value.front() == ' ') value.erase(0, 1);
        out[key] = value;
    }
    return out;
}

inline void save_model_file(const std::filesystem::path& p, const MlpModel& m) {
    std::ofstream out(p);
    if (!out) throw IoError("cannot write " + p.string());
    save_model(out, m);
}

inline MlpModel load_model_file(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw IoError("cannot read " + p.string());
    return load_model(in);
}

inline void save_nuisances(const std::filesystem::path& dir, const NuisanceSet& ns) {
    save_model_file(dir / "propensity.mlp", ns.propensity);
    save_model_file(dir / "mu0.mlp", ns.mu0);
    save_model_file(dir / "mu1.mlp", ns.mu1);
}

inline NuisanceSet load_nuisances(const std::filesystem::path& dir, InputSpace space,
                                  double clip_eps) {
    NuisanceSet ns;
    ns.input_space = space;
    ns.clip_eps = clip_eps;
    ns.propensity = load_model_file(dir / "propensity.mlp");
    ns.mu0 = load_model_file(dir / "mu0.mlp");
    ns.mu1 = load_model_file(dir / "mu1.mlp");
    return ns;
}

}  // namespace detail

// DR learner run end to end on representations; trains on every record,
// annotated or not.
class PlugInEstimator final : public EffectEstimator {
public:
    NuisanceSet nuisances;  // representation space
    MlpModel regressor;

    EstimatorKind kind() const override { return EstimatorKind::plug_in; }
    double predict(std::span<const double> phi) const override { return regressor.forward(phi); }

    void save(const std::filesystem::path& dir) const override {
        std::filesystem::create_directories(dir);
        detail::write_manifest(dir, {{"kind", "plug_in"},
                                     {"clip_eps", detail::format_hex(nuisances.clip_eps)}});
        detail::save_nuisances(dir, nuisances);
        detail::save_model_file(dir / "regressor.mlp", regressor);
    }
};

// Regresses the covariate-space pseudo-outcome of the annotated subset
// directly onto the representations.
class DirectRegressionEstimator final : public EffectEstimator {
public:
    NuisanceSet nuisances;  // covariate space
    MlpModel regressor;

    EstimatorKind kind() const override { return EstimatorKind::direct_regression; }
    double predict(std::span<const double> phi) const override { return regressor.forward(phi); }
    const NuisanceSet* covariate_nuisances() const override { return &nuisances; }

    void save(const std::filesystem::path& dir) const override {
        std::filesystem::create_directories(dir);
        detail::write_manifest(dir, {{"kind", "direct_regression"},
                                     {"clip_eps", detail::format_hex(nuisances.clip_eps)}});
        detail::save_nuisances(dir, nuisances);
        detail::save_model_file(dir / "regressor.mlp", regressor);
    }
};

struct CovariateModel {
    std::string name;
    bool binary = true;
    MlpModel model;  // sigmoid head for binary covariates, identity otherwise
};

// Estimates the effect as a Monte Carlo mixture: covariate vectors are
// sampled from per-covariate models given phi and pushed through a
// covariate-space effect regressor.
class InfoExtractionEstimator final : public EffectEstimator {
public:
    NuisanceSet nuisances;  // covariate space
    MlpModel tau_x;
    std::vector<CovariateModel> covariate_models;
    int fever_low_idx = -1, fever_high_idx = -1;
    int mc_draws = 128;
    std::uint64_t predict_seed = 0;

    EstimatorKind kind() const override { return EstimatorKind::info_extraction; }
    const NuisanceSet* covariate_nuisances() const override { return &nuisances; }

    // Per-covariate model outputs for this phi: Bernoulli probabilities for
    // binary covariates, point predictions for continuous ones.
    std::vector<double> covariate_predictions(std::span<const double> phi) const {
        std::vector<double> out;
        out.reserve(covariate_models.size());
        for (const auto& cm : covariate_models) out.push_back(cm.model.forward(phi));
        return out;
    }

    // Exclusive fever levels: the two classifier probabilities and the
    // "none" complement, renormalized to a proper categorical.
    static std::array<double, 3> fever_distribution(double q_low, double q_high) {
        double q_none = std::clamp(1.0 - q_low - q_high, 0.0, 1.0);
        double z = q_low + q_high + q_none;
        return {q_low / z, q_high / z, q_none / z};
    }

    double predict(std::span<const double> phi) const override {
        std::vector<double> q = covariate_predictions(phi);
        Rng rng(derive_seed(predict_seed, hash_doubles(phi.data(), phi.size())));
        std::vector<double> x(covariate_models.size(), 0.0);
        double sum = 0.0;
        for (int m = 0; m < mc_draws; ++m) {
            for (std::size_t j = 0; j < covariate_models.size(); ++j) {
                if (static_cast<int>(j) == fever_high_idx) continue;  // drawn with fever_low
                if (static_cast<int>(j) == fever_low_idx) {
                    auto dist = fever_distribution(q[fever_low_idx], q[fever_high_idx]);
                    double u = rng.uniform01();
                    x[fever_low_idx] = u < dist[0] ? 1.0 : 0.0;
                    x[fever_high_idx] = (u >= dist[0] && u < dist[0] + dist[1]) ? 1.0 : 0.0;
                } else if (covariate_models[j].binary) {
                    x[j] = rng.bernoulli(q[j]) ? 1.0 : 0.0;
                } else {
                    x[j] = q[j];
                }
            }
            sum += tau_x.forward(x);
        }
        return sum / mc_draws;
    }

    void save(const std::filesystem::path& dir) const override {
        std::filesystem::create_directories(dir);
        std::vector<std::pair<std::string, std::string>> entries = {
            {"kind", "info_extraction"},
            {"clip_eps", detail::format_hex(nuisances.clip_eps)},
            {"mc_draws", std::to_string(mc_draws)},
            {"predict_seed", std::to_string(predict_seed)},
            {"fever_low_idx", std::to_string(fever_low_idx)},
            {"fever_high_idx", std::to_string(fever_high_idx)},
        };
        for (std::size_t j = 0; j < covariate_models.size(); ++j)
            entries.emplace_back("covariate_" + std::to_string(j),
                                 covariate_models[j].name +
                                     (covariate_models[j].binary ? " binary" : " continuous"));
        detail::write_manifest(dir, entries);
        detail::save_nuisances(dir, nuisances);
        detail::save_model_file(dir / "tau_x.mlp", tau_x);
        for (std::size_t j = 0; j < covariate_models.size(); ++j)
            detail::save_model_file(dir / ("cov_" + std::to_string(j) + ".mlp"),
                                    covariate_models[j].model);
    }
};

// Regression of the sampling-bias-adjusted target onto representations.
class AdjustedEstimator final : public EffectEstimator {
public:
    std::unique_ptr<EffectEstimator> base;
    MlpModel regressor;
    double p_s_floor = 0.005;

    EstimatorKind kind() const override { return EstimatorKind::adjusted; }
    double predict(std::span<const double> phi) const override { return regressor.forward(phi); }

    void save(const std::filesystem::path& dir) const override {
        std::filesystem::create_directories(dir);
        detail::write_manifest(dir, {{"kind", "adjusted"},
                                     {"p_s_floor", detail::format_hex(p_s_floor)},
                                     {"base_kind", estimator_name(base->kind())}});
        detail::save_model_file(dir / "regressor.mlp", regressor);
        base->save(dir / "base");
    }
};

inline std::unique_ptr<PlugInEstimator> fit_plug_in(const TrainSet& ts,
                                                    const EstimatorConfig& cfg) {
    auto est = std::make_unique<PlugInEstimator>();
    est->nuisances = fit_nuisances(ts.rows, InputSpace::representation, cfg, 10);
    Matrix phis = detail::rows_to_matrix(ts.rows, InputSpace::representation);
    std::vector<double> delta_phi(ts.rows.size());
    for (std::size_t i = 0; i < ts.rows.size(); ++i)
        delta_phi[i] = nuisance_pseudo_outcome(est->nuisances, ts.rows[i], phis.row(i));
    est->regressor =
        detail::fit_scalar_model(phis, delta_phi, Head::identity, LossKind::mse, cfg, 13);
    return est;
}

inline std::unique_ptr<DirectRegressionEstimator> fit_direct_regression(
    const TrainSet& ts, const EstimatorConfig& cfg) {
    std::vector<EstRow> s1 = detail::annotated_rows(ts);
    if (s1.empty()) throw InsufficientDataError("direct regression: no annotated records");
    auto est = std::make_unique<DirectRegressionEstimator>();
    est->nuisances = fit_nuisances(s1, InputSpace::covariates, cfg, 20);
    std::vector<double> delta_x(s1.size());
    for (std::size_t i = 0; i < s1.size(); ++i)
        delta_x[i] = nuisance_pseudo_outcome(est->nuisances, s1[i], s1[i].x);
    Matrix phis = detail::rows_to_matrix(s1, InputSpace::representation);
    est->regressor =
        detail::fit_scalar_model(phis, delta_x, Head::identity, LossKind::mse, cfg, 23);
    return est;
}

inline std::unique_ptr<InfoExtractionEstimator> fit_info_extraction(const TrainSet& ts,
                                                                    const EstimatorConfig& cfg) {
    if (cfg.mc_draws < 1) throw ConfigError("info extraction: mc_draws must be at least 1");
    std::vector<EstRow> s1 = detail::annotated_rows(ts);
    if (s1.empty()) throw InsufficientDataError("info extraction: no annotated records");
    const auto& schema = ts.schema();

    auto est = std::make_unique<InfoExtractionEstimator>();
    est->mc_draws = cfg.mc_draws;
    est->predict_seed = derive_seed(cfg.seed, 0x9e9e);
    est->fever_low_idx = schema.fever_low_idx;
    est->fever_high_idx = schema.fever_high_idx;
    est->nuisances = fit_nuisances(s1, InputSpace::covariates, cfg, 30);

    Matrix xs = detail::rows_to_matrix(s1, InputSpace::covariates);
    std::vector<double> delta_x(s1.size());
    for (std::size_t i = 0; i < s1.size(); ++i)
        delta_x[i] = nuisance_pseudo_outcome(est->nuisances, s1[i], s1[i].x);
    est->tau_x = detail::fit_scalar_model(xs, delta_x, Head::identity, LossKind::mse, cfg, 33);

    Matrix phis = detail::rows_to_matrix(s1, InputSpace::representation);
    for (std::size_t j = 0; j < schema.x_names.size(); ++j) {
        std::vector<double> targets(s1.size());
        for (std::size_t i = 0; i < s1.size(); ++i) targets[i] = s1[i].x[j];
        CovariateModel cm;
        cm.name = schema.x_names[j];
        cm.binary = schema.x_binary[j];
        cm.model = detail::fit_scalar_model(
            phis, targets, cm.binary ? Head::sigmoid : Head::identity,
            cm.binary ? LossKind::binary_cross_entropy : LossKind::mse, cfg, 40 + j);
        est->covariate_models.push_back(std::move(cm));
    }
    return est;
}

// Regresses the adjusted target onto phi over the full training set. The
// base estimator supplies both the initial effect estimates and the
// covariate-space nuisances for the annotated pseudo-outcomes.
inline std::unique_ptr<AdjustedEstimator> fit_adjusted(const TrainSet& ts,
                                                       std::unique_ptr<EffectEstimator> base,
                                                       const EstimatorConfig& cfg) {
    if (ts.rows.empty()) throw InsufficientDataError("adjusted: no records");
    const NuisanceSet* ns = base->covariate_nuisances();
    if (!ns)
        throw ConfigError("adjusted: base estimator must carry covariate-space nuisances "
                          "(direct_regression or info_extraction)");

    std::size_t annotated = 0;
    std::vector<double> targets(ts.rows.size());
    for (std::size_t i = 0; i < ts.rows.size(); ++i) {
        const EstRow& r = ts.rows[i];
        double tau_phi = base->predict(r.phi);
        std::optional<double> delta_x;
        if (r.s == 1) {
            ++annotated;
            delta_x = nuisance_pseudo_outcome(*ns, r, r.x);
        }
        double p_s = std::clamp(r.p_s, cfg.p_s_floor, 1.0);
        targets[i] = adjusted_pseudo_outcome(r.s, delta_x, tau_phi, p_s);
    }

    auto est = std::make_unique<AdjustedEstimator>();
    est->p_s_floor = cfg.p_s_floor;
    Matrix phis = detail::rows_to_matrix(ts.rows, InputSpace::representation);
    // Inverse-probability weighting makes these targets heavy-tailed at low
    // annotation counts; conservative updates keep the loss stable there.
    TrainConfig tc = cfg.train;
    if (cfg.instability_mitigation && annotated < static_cast<std::size_t>(cfg.instability_threshold)) {
        tc.optimizer = OptimizerKind::sgd;
        tc.batch_size = 1024;
    }
    est->regressor =
        detail::fit_scalar_model(phis, targets, Head::identity, LossKind::mse, cfg, 50, &tc);
    est->base = std::move(base);
    return est;
}

// Sweep-facing dispatch; the adjusted estimator builds on direct regression.
inline std::unique_ptr<EffectEstimator> fit_estimator(EstimatorKind kind, const TrainSet& ts,
                                                      const EstimatorConfig& cfg) {
    switch (kind) {
        case EstimatorKind::plug_in: return fit_plug_in(ts, cfg);
        case EstimatorKind::direct_regression: return fit_direct_regression(ts, cfg);
        case EstimatorKind::info_extraction: return fit_info_extraction(ts, cfg);
        case EstimatorKind::adjusted:
            return fit_adjusted(ts, fit_direct_regression(ts, cfg), cfg);
    }
    throw ConfigError("unknown estimator kind");
}

inline std::unique_ptr<EffectEstimator> load_estimator(const std::filesystem::path& dir) {
    auto manifest = detail::read_manifest(dir);
    auto need = [&](const std::string& key) {
        auto it = manifest.find(key);
        if (it == manifest.end()) throw IoError("estimator manifest missing key '" + key + "'");
        return it->second;
    };
    std::string kind = need("kind");
    if (kind == "plug_in") {
        auto est = std::make_unique<PlugInEstimator>();
        est->nuisances = detail::load_nuisances(dir, InputSpace::representation,
                                                detail::parse_hex(need("clip_eps")));
        est->regressor = detail::load_model_file(dir / "regressor.mlp");
        return est;
    }
    if (kind == "direct_regression") {
        auto est = std::make_unique<DirectRegressionEstimator>();
        est->nuisances = detail::load_nuisances(dir, InputSpace::covariates,
                                                detail::parse_hex(need("clip_eps")));
        est->regressor = detail::load_model_file(dir / "regressor.mlp");
        return est;
    }
    if (kind == "info_extraction") {
        auto est = std::make_unique<InfoExtractionEstimator>();
        est->nuisances = detail::load_nuisances(dir, InputSpace::covariates,
                                                detail::parse_hex(need("clip_eps")));
        est->tau_x = detail::load_model_file(dir / "tau_x.mlp");
        est->mc_draws = std::stoi(need("mc_draws"));
        est->predict_seed = std::stoull(need("predict_seed"));
        est->fever_low_idx = std::stoi(need("fever_low_idx"));
        est->fever_high_idx = std::stoi(need("fever_high_idx"));
        for (std::size_t j = 0;; ++j) {
            auto it = manifest.find("covariate_" + std::to_string(j));
            if (it == manifest.end()) break;
            auto space = it->second.find(' ');
            CovariateModel cm;
            cm.name = it->second.substr(0, space);
            cm.binary = it->second.substr(space + 1) == "binary";
            cm.model = detail::load_model_file(dir / ("cov_" + std::to_string(j) + ".mlp"));
            est->covariate_models.push_back(std::move(cm));
        }
        return est;
    }
    if (kind == "adjusted") {
        auto est = std::make_unique<AdjustedEstimator>();
        est->p_s_floor = detail::parse_hex(need("p_s_floor"));
        est->regressor = detail::load_model_file(dir / "regressor.mlp");
        est->base = load_estimator(dir / "base");
        return est;
    }
    throw IoError("estimator manifest has unknown kind '" + kind + "'");
}

}  // namespace catephi
