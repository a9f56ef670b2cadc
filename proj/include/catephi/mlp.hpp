#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "catephi/errors.hpp"
#include "catephi/matrix.hpp"
#include "catephi/rng.hpp"

namespace catephi {

enum class Head { identity, sigmoid };
enum class LossKind { mse, binary_cross_entropy };
enum class OptimizerKind { adam, sgd };

struct TrainConfig {
    int epochs = 30;
    int batch_size = 256;
    double lr0 = 5e-3;
    double decay = 0.9;  // lr at epoch t is lr0 * decay^t
    OptimizerKind optimizer = OptimizerKind::adam;
    LossKind loss = LossKind::mse;
    std::uint64_t seed = 0;
};

struct TrainReport {
    double final_loss = 0.0;
    std::vector<double> loss_per_epoch;
};

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Sigmoid outputs are kept inside (0,1) so log terms stay finite.
constexpr double kProbClamp = 1e-7;

inline double clamp_prob(double p) {
    return std::clamp(p, kProbClamp, 1.0 - kProbClamp);
}

// Single-hidden-layer feedforward network with a ReLU activation and a
// scalar output. Every learned function in this library (propensities,
// outcome regressors, covariate classifiers, effect regressors) is one of
// these.
struct MlpModel {
    int input_dim = 0;
    int hidden_dim = 0;
    Head head = Head::identity;
    std::vector<double> w_in;   // hidden_dim x input_dim, row-major
    std::vector<double> b_in;   // hidden_dim
    std::vector<double> w_out;  // hidden_dim
    double b_out = 0.0;

    MlpModel() = default;

    // Glorot-uniform weights (bounds sqrt(6/(fan_in+fan_out))), zero biases.
    MlpModel(int in_dim, int hid_dim, Head h, std::uint64_t init_seed)
        : input_dim(in_dim), hidden_dim(hid_dim), head(h) {
        if (in_dim < 1 || hid_dim < 1)
            throw DimensionError("model dimensions must be positive");
        w_in.assign(static_cast<std::size_t>(hid_dim) * in_dim, 0.0);
        b_in.assign(hid_dim, 0.0);
        w_out.assign(hid_dim, 0.0);
        Rng rng(derive_seed(init_seed, 0x1717));
        double a_in = std::sqrt(6.0 / (in_dim + hid_dim));
        for (auto& w : w_in) w = rng.uniform(-a_in, a_in);
        double a_out = std::sqrt(6.0 / (hid_dim + 1));
        for (auto& w : w_out) w = rng.uniform(-a_out, a_out);
    }

    static MlpModel zeros(int in_dim, int hid_dim, Head h) {
        MlpModel m;
        m.input_dim = in_dim;
        m.hidden_dim = hid_dim;
        m.head = h;
        m.w_in.assign(static_cast<std::size_t>(hid_dim) * in_dim, 0.0);
        m.b_in.assign(hid_dim, 0.0);
        m.w_out.assign(hid_dim, 0.0);
        return m;
    }

    std::size_t parameter_count() const {
        return w_in.size() + b_in.size() + w_out.size() + 1;
    }

    // head(w_out . relu(W_in x + b_in) + b_out)
    double forward(std::span<const double> x) const {
        if (static_cast<int>(x.size()) != input_dim)
            throw DimensionError("forward: input has length " + std::to_string(x.size()) +
                                 ", model expects " + std::to_string(input_dim));
        double u = b_out;
        for (int i = 0; i < hidden_dim; ++i) {
            const double* wr = w_in.data() + static_cast<std::size_t>(i) * input_dim;
            double z = b_in[i];
            for (int j = 0; j < input_dim; ++j) z += wr[j] * x[j];
            if (z > 0.0) u += w_out[i] * z;
        }
        return head == Head::sigmoid ? clamp_prob(sigmoid(u)) : u;
    }

    std::vector<double> forward_batch(const Matrix& inputs) const {
        std::vector<double> out(inputs.rows);
        for (std::size_t r = 0; r < inputs.rows; ++r) out[r] = forward(inputs.row(r));
        return out;
    }
};

struct MlpGradients {
    std::vector<double> w_in, b_in, w_out;
    double b_out = 0.0;
};

namespace detail {

inline void require_valid_loss(Head head, LossKind loss) {
    if (loss == LossKind::binary_cross_entropy && head != Head::sigmoid)
        throw ConfigError("binary_cross_entropy requires a sigmoid head");
}

// Pre-activation forward pass; returns (z vector, output before head).
inline double raw_forward(const MlpModel& m, std::span<const double> x, std::vector<double>& z) {
    z.resize(m.hidden_dim);
    double u = m.b_out;
    for (int i = 0; i < m.hidden_dim; ++i) {
        const double* wr = m.w_in.data() + static_cast<std::size_t>(i) * m.input_dim;
        double zi = m.b_in[i];
        for (int j = 0; j < m.input_dim; ++j) zi += wr[j] * x[j];
        z[i] = zi;
        if (zi > 0.0) u += m.w_out[i] * zi;
    }
    return u;
}

inline double sample_loss(double u, double target, Head head, LossKind loss) {
    if (loss == LossKind::mse) {
        double pred = head == Head::sigmoid ? clamp_prob(sigmoid(u)) : u;
        double d = pred - target;
        return d * d;
    }
    double p = clamp_prob(sigmoid(u));
    return -(target * std::log(p) + (1.0 - target) * std::log(1.0 - p));
}

// d(loss)/d(u) for the pre-head output u.
inline double sample_dloss_du(double u, double target, Head head, LossKind loss) {
    if (loss == LossKind::mse) {
        if (head == Head::sigmoid) {
            double p = sigmoid(u);
            return 2.0 * (p - target) * p * (1.0 - p);
        }
        return 2.0 * (u - target);
    }
    return sigmoid(u) - target;  // bce through the logit
}

}  // namespace detail

inline double loss_value(const MlpModel& m, std::span<const double> x, double target,
                         LossKind loss) {
    detail::require_valid_loss(m.head, loss);
    std::vector<double> z;
    double u = detail::raw_forward(m, x, z);
    return detail::sample_loss(u, target, m.head, loss);
}

// Analytic gradient of the per-sample loss with respect to every parameter.
inline MlpGradients loss_gradients(const MlpModel& m, std::span<const double> x, double target,
                                   LossKind loss) {
    detail::require_valid_loss(m.head, loss);
    std::vector<double> z;
    double u = detail::raw_forward(m, x, z);
    double gu = detail::sample_dloss_du(u, target, m.head, loss);

    MlpGradients g;
    g.w_in.assign(m.w_in.size(), 0.0);
    g.b_in.assign(m.b_in.size(), 0.0);
    g.w_out.assign(m.w_out.size(), 0.0);
    g.b_out = gu;
    for (int i = 0; i < m.hidden_dim; ++i) {
        double a = z[i] > 0.0 ? z[i] : 0.0;
        g.w_out[i] = gu * a;
        if (z[i] > 0.0) {
            double gz = gu * m.w_out[i];
            g.b_in[i] = gz;
            double* row = g.w_in.data() + static_cast<std::size_t>(i) * m.input_dim;
            for (int j = 0; j < m.input_dim; ++j) row[j] = gz * x[j];
        }
    }
    return g;
}

// Compares the analytic gradient against central finite differences
// (step 1e-5) over every parameter and returns the largest discrepancy
// |g_a - g_n| / max(1, |g_a| + |g_n|).
inline double gradient_check(const MlpModel& model, std::span<const double> x, double target,
                             LossKind loss) {
    const double h = 1e-5;
    MlpGradients analytic = loss_gradients(model, x, target, loss);
    MlpModel m = model;

    auto probe = [&](double& param, double ga) {
        double saved = param;
        param = saved + h;
        double lp = loss_value(m, x, target, loss);
        param = saved - h;
        double lm = loss_value(m, x, target, loss);
        param = saved;
        double gn = (lp - lm) / (2.0 * h);
        return std::abs(ga - gn) / std::max(1.0, std::abs(ga) + std::abs(gn));
    };

    double worst = 0.0;
    for (std::size_t k = 0; k < m.w_in.size(); ++k)
        worst = std::max(worst, probe(m.w_in[k], analytic.w_in[k]));
    for (std::size_t k = 0; k < m.b_in.size(); ++k)
        worst = std::max(worst, probe(m.b_in[k], analytic.b_in[k]));
    for (std::size_t k = 0; k < m.w_out.size(); ++k)
        worst = std::max(worst, probe(m.w_out[k], analytic.w_out[k]));
    worst = std::max(worst, probe(m.b_out, analytic.b_out));
    return worst;
}

// Mini-batch training. The batch order is reshuffled every epoch from a
// stream derived from cfg.seed, the last partial batch is kept, and the
// learning rate at epoch t is exactly lr0 * decay^t. Deterministic given
// (seed, data order).
inline TrainReport train(MlpModel& model, const Matrix& inputs, std::span<const double> targets,
                         const TrainConfig& cfg) {
    detail::require_valid_loss(model.head, cfg.loss);
    if (inputs.cols != static_cast<std::size_t>(model.input_dim))
        throw DimensionError("train: input matrix has " + std::to_string(inputs.cols) +
                             " columns, model expects " + std::to_string(model.input_dim));
    if (inputs.rows != targets.size() || targets.empty())
        throw DimensionError("train: need one target per input row (and at least one row)");
    if (cfg.batch_size < 1) throw ConfigError("train: batch_size must be positive");
    if (cfg.decay <= 0.0 || cfg.decay > 1.0) throw ConfigError("train: decay must be in (0,1]");
    if (cfg.loss == LossKind::binary_cross_entropy)
        for (double t : targets)
            if (t < 0.0 || t > 1.0)
                throw ConfigError("train: bce targets must lie in [0,1]");

    const std::size_t n = inputs.rows;
    const int h = model.hidden_dim;
    const int d = model.input_dim;
    const std::size_t np = model.parameter_count();

    TrainReport report;
    report.loss_per_epoch.reserve(cfg.epochs);
    if (cfg.epochs <= 0) return report;

    Rng shuffle_rng(derive_seed(cfg.seed, 0x5821));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    // Flat parameter and gradient views: [w_in, b_in, w_out, b_out].
    std::vector<double> grad(np, 0.0);
    std::vector<double> adam_m, adam_v;
    if (cfg.optimizer == OptimizerKind::adam) {
        adam_m.assign(np, 0.0);
        adam_v.assign(np, 0.0);
    }
    const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    long step = 0;

    std::vector<double> z(h);
    auto param_at = [&](std::size_t k) -> double& {
        if (k < model.w_in.size()) return model.w_in[k];
        k -= model.w_in.size();
        if (k < model.b_in.size()) return model.b_in[k];
        k -= model.b_in.size();
        if (k < model.w_out.size()) return model.w_out[k];
        return model.b_out;
    };

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double lr = cfg.lr0 * std::pow(cfg.decay, epoch);
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;

        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            std::size_t stop = std::min(n, start + cfg.batch_size);
            double inv = 1.0 / static_cast<double>(stop - start);
            std::fill(grad.begin(), grad.end(), 0.0);
            double batch_loss = 0.0;

            for (std::size_t k = start; k < stop; ++k) {
                auto x = inputs.row(order[k]);
                double target = targets[order[k]];
                double u = detail::raw_forward(model, x, z);
                batch_loss += detail::sample_loss(u, target, model.head, cfg.loss);
                double gu = detail::sample_dloss_du(u, target, model.head, cfg.loss) * inv;

                double* gw_in = grad.data();
                double* gb_in = grad.data() + model.w_in.size();
                double* gw_out = gb_in + h;
                for (int i = 0; i < h; ++i) {
                    if (z[i] <= 0.0) continue;
                    gw_out[i] += gu * z[i];
                    double gz = gu * model.w_out[i];
                    gb_in[i] += gz;
                    double* row = gw_in + static_cast<std::size_t>(i) * d;
                    for (int j = 0; j < d; ++j) row[j] += gz * x[j];
                }
                grad[np - 1] += gu;
            }

            if (std::isnan(batch_loss))
                throw TrainingDivergedError(
                    "training diverged: NaN loss at epoch " + std::to_string(epoch), epoch);
            epoch_loss += batch_loss;

            if (cfg.optimizer == OptimizerKind::adam) {
                ++step;
                double c1 = 1.0 - std::pow(beta1, step);
                double c2 = 1.0 - std::pow(beta2, step);
                for (std::size_t k = 0; k < np; ++k) {
                    adam_m[k] = beta1 * adam_m[k] + (1.0 - beta1) * grad[k];
                    adam_v[k] = beta2 * adam_v[k] + (1.0 - beta2) * grad[k] * grad[k];
                    param_at(k) -= lr * (adam_m[k] / c1) / (std::sqrt(adam_v[k] / c2) + eps);
                }
            } else {
                for (std::size_t k = 0; k < np; ++k) param_at(k) -= lr * grad[k];
            }
        }
        report.loss_per_epoch.push_back(epoch_loss / static_cast<double>(n));
    }
    report.final_loss = report.loss_per_epoch.back();
    return report;
}

inline const char* head_name(Head h) { return h == Head::sigmoid ? "sigmoid" : "identity"; }

inline Head head_from_name(const std::string& s) {
    if (s == "sigmoid") return Head::sigmoid;
    if (s == "identity") return Head::identity;
    throw IoError("unknown head name: '" + s + "'");
}

// Model file format: one "mlpv1 <input_dim> <hidden_dim> <head>" header
// line, then the input weights as a matv1 block (hidden_dim x input_dim),
// then hex-float lines for b_in, w_out, and b_out. Round-trips exactly.
inline void save_model(std::ostream& out, const MlpModel& m) {
    out << "mlpv1 " << m.input_dim << ' ' << m.hidden_dim << ' ' << head_name(m.head) << '\n';
    Matrix w(m.hidden_dim, m.input_dim);
    w.data = m.w_in;
    save_matrix(out, w);
    for (int i = 0; i < m.hidden_dim; ++i)
        out << (i ? " " : "") << detail::format_hex(m.b_in[i]);
    out << '\n';
    for (int i = 0; i < m.hidden_dim; ++i)
        out << (i ? " " : "") << detail::format_hex(m.w_out[i]);
    out << '\n';
    out << detail::format_hex(m.b_out) << '\n';
}

inline MlpModel load_model(std::istream& in) {
    std::string magic, head_str;
    int in_dim = 0, hid_dim = 0;
    if (!(in >> magic >> in_dim >> hid_dim >> head_str) || magic != "mlpv1")
        throw IoError("not an mlpv1 model stream");
    MlpModel m = MlpModel::zeros(in_dim, hid_dim, head_from_name(head_str));
    Matrix w = load_matrix(in);
    if (w.rows != static_cast<std::size_t>(hid_dim) || w.cols != static_cast<std::size_t>(in_dim))
        throw IoError("model weight matrix has wrong shape");
    m.w_in = std::move(w.data);
    std::string tok;
    for (int i = 0; i < hid_dim; ++i) {
        if (!(in >> tok)) throw IoError("truncated model stream");
        m.b_in[i] = detail::parse_hex(tok);
    }
    for (int i = 0; i < hid_dim; ++i) {
        if (!(in >> tok)) throw IoError("truncated model stream");
        m.w_out[i] = detail::parse_hex(tok);
    }
    if (!(in >> tok)) throw IoError("truncated model stream");
    m.b_out = detail::parse_hex(tok);
    return m;
}

}  // namespace catephi
