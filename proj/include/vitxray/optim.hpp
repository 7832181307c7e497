#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "vitxray/tensor.hpp"

namespace vitxray {

enum class OptimizerVariant { Adam, RectifiedAdam };

inline const char* optimizer_name(OptimizerVariant v) {
    return v == OptimizerVariant::Adam ? "adam" : "radam";
}

inline OptimizerVariant parse_optimizer(const std::string& s) {
    if (s == "adam") return OptimizerVariant::Adam;
    if (s == "radam" || s == "rectified_adam") return OptimizerVariant::RectifiedAdam;
    throw std::invalid_argument("unknown optimizer '" + s + "' (expected adam or radam)");
}

struct OptimState {
    OptimizerVariant variant = OptimizerVariant::Adam;
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::size_t t = 0;
    std::vector<std::vector<double>> m, v;

    static OptimState create(OptimizerVariant variant, double lr, const std::vector<Tensor>& params) {
        OptimState s;
        s.variant = variant;
        s.lr = lr;
        for (const auto& p : params) {
            s.m.emplace_back(p.numel(), 0.0);
            s.v.emplace_back(p.numel(), 0.0);
        }
        return s;
    }
};

namespace detail {

struct RadamTerms {
    double rho_t;
    double rect;      // r_t, meaningful only when adaptive
    bool adaptive;    // rho_t > 4: variance-adapted branch
};

inline RadamTerms radam_terms(std::size_t t, double beta2) {
    double rho_inf = 2.0 / (1.0 - beta2) - 1.0;
    double b2t = std::pow(beta2, static_cast<double>(t));
    double rho_t = rho_inf - 2.0 * static_cast<double>(t) * b2t / (1.0 - b2t);
    RadamTerms out{rho_t, 1.0, rho_t > 4.0};
    if (out.adaptive)
        out.rect = std::sqrt(((rho_t - 4.0) * (rho_t - 2.0) * rho_inf) /
                             ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t));
    return out;
}

// Shared moment update + parameter step. The Adam path is radam with the
// adaptive branch forced and r_t = 1.
inline void moment_step(std::vector<Tensor>& params, OptimState& s, bool adaptive, double rect) {
    if (params.size() != s.m.size())
        throw std::invalid_argument("optimizer: state tracks " + std::to_string(s.m.size()) + " tensors, got " +
                                    std::to_string(params.size()));
    double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.t));
    double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.t));
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& p = params[pi].mutable_data();
        const auto& g = params[pi].grad();
        auto& m = s.m[pi];
        auto& v = s.v[pi];
        if (g.size() != p.size() || m.size() != p.size())
            throw std::invalid_argument("optimizer: gradient shape mismatch on tensor " + std::to_string(pi));
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g[i];
            v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g[i] * g[i];
            double m_hat = m[i] / bc1;
            if (adaptive) {
                double v_hat = v[i] / bc2;
                p[i] -= s.lr * rect * m_hat / (std::sqrt(v_hat) + s.eps);
            } else {
                p[i] -= s.lr * m_hat;
            }
        }
    }
}

}  // namespace detail

inline void adam_step(std::vector<Tensor>& params, OptimState& state) {
    if (state.variant != OptimizerVariant::Adam) throw std::invalid_argument("adam_step: state variant is not Adam");
    ++state.t;
    detail::moment_step(params, state, /*adaptive=*/true, /*rect=*/1.0);
}

// Variance-rectified Adam: early steps (rho_t <= 4) fall back to plain
// bias-corrected momentum; later steps scale the adaptive update by r_t.
inline void radam_step(std::vector<Tensor>& params, OptimState& state) {
    if (state.variant != OptimizerVariant::RectifiedAdam)
        throw std::invalid_argument("radam_step: state variant is not RectifiedAdam");
    ++state.t;
    auto terms = detail::radam_terms(state.t, state.beta2);
    detail::moment_step(params, state, terms.adaptive, terms.rect);
}

inline void optimizer_step(std::vector<Tensor>& params, OptimState& state) {
    if (state.variant == OptimizerVariant::Adam)
        adam_step(params, state);
    else
        radam_step(params, state);
}

// ---- schedulers ------------------------------------------------------------

struct PlateauState {
    std::string metric_name = "val_accuracy";
    double best = -std::numeric_limits<double>::infinity();
    int epochs_since_improvement = 0;
    double factor = 0.2;
    int patience = 3;
    double lr_floor = 1e-7;
};

// Returns the lr for the next epoch. Reduces by `factor` once the metric has
// failed to strictly improve for more than `patience` epochs.
inline double plateau_step(PlateauState& state, double metric, double current_lr) {
    if (!std::isfinite(metric)) throw std::invalid_argument("plateau_step: non-finite metric");
    if (metric > state.best) {
        state.best = metric;
        state.epochs_since_improvement = 0;
        return current_lr;
    }
    ++state.epochs_since_improvement;
    if (state.epochs_since_improvement > state.patience) {
        state.epochs_since_improvement = 0;
        return std::max(current_lr * state.factor, state.lr_floor);
    }
    return current_lr;
}

struct EarlyStopState {
    std::string metric_name = "val_accuracy";
    double best = -std::numeric_limits<double>::infinity();
    int epochs_since_improvement = 0;
    int patience = 5;
    bool stopped = false;
};

// Returns true once the metric has not strictly improved for more than
// `patience` consecutive epochs; the decision is permanent.
inline bool early_stop_step(EarlyStopState& state, double metric) {
    if (!std::isfinite(metric)) throw std::invalid_argument("early_stop_step: non-finite metric");
    if (state.stopped) return true;
    if (metric > state.best) {
        state.best = metric;
        state.epochs_since_improvement = 0;
        return false;
    }
    ++state.epochs_since_improvement;
    if (state.epochs_since_improvement > state.patience) state.stopped = true;
    return state.stopped;
}

}  // namespace vitxray
