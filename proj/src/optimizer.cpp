#include "q3r/optimizer.hpp"

#include "q3r/errors.hpp"

#include <cmath>

namespace q3r {

void OptimizerConfig::validate() const {
    if (!(alpha > 0.0))
        throw ConfigError("alpha must be positive");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
        throw ConfigError("betas must lie in [0, 1)");
    if (!(delta > 0.0))
        throw ConfigError("delta must be positive");
    if (!(eta > 0.0))
        throw ConfigError("eta must be positive");
    if (lambda < 0.0)
        throw ConfigError("lambda must be non-negative");
    if (period < 1)
        throw ConfigError("period must be positive");
    if (!(eps_floor > 0.0))
        throw ConfigError("eps floor must be positive");
    if (clip_norm < 0.0)
        throw ConfigError("clip norm must be non-negative");
}

namespace {

void check_step_inputs(const std::vector<ParamTensor*>& params,
                       const std::vector<Matrix>& grads,
                       const OptimizerConfig& cfg, long t) {
    cfg.validate();
    if (t < 0)
        throw ConfigError("step index must be non-negative");
    if (params.size() != grads.size())
        throw ConfigError("one gradient per parameter expected");
    for (std::size_t i = 0; i < params.size(); ++i) {
        const ParamTensor& p = *params[i];
        if (grads[i].rows() != p.w.rows() || grads[i].cols() != p.w.cols())
            throw ConfigError("gradient shape mismatch at " + p.name);
        if (!grads[i].allFinite())
            throw NumericError("non-finite gradient at " + p.name);
    }
}

Matrix clipped(const Matrix& g, double clip_norm) {
    if (clip_norm <= 0.0)
        return g;
    const double norm = g.norm();
    if (norm <= clip_norm)
        return g;
    return g * (clip_norm / norm);
}

void refresh_if_due(ParamTensor& p, long t, long period) {
    if (!p.q3r_enabled || t % period != 0)
        return;
    auto [op, next] = update_operator(p.w, p.smoothing);
    p.op = std::move(op);
    p.smoothing = next;
}

// Adam moment update plus bias-corrected direction; mutates the moments.
Matrix adam_direction(ParamTensor& p, const Matrix& g,
                      const OptimizerConfig& cfg, long t) {
    p.m = cfg.beta1 * p.m + (1.0 - cfg.beta1) * g;
    p.v = cfg.beta2 * p.v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    const double mc = 1.0 - std::pow(cfg.beta1, static_cast<double>(t + 1));
    const double vc = 1.0 - std::pow(cfg.beta2, static_cast<double>(t + 1));
    return ((p.m / mc).array() / ((p.v / vc).array().sqrt() + cfg.delta)).matrix();
}

} // namespace

void adamq3r_step(const std::vector<ParamTensor*>& params,
                  const std::vector<Matrix>& grads,
                  const OptimizerConfig& cfg, long t) {
    check_step_inputs(params, grads, cfg, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        ParamTensor& p = *params[i];
        refresh_if_due(p, t, cfg.period);
        const Matrix dir = adam_direction(p, clipped(grads[i], cfg.clip_norm), cfg, t);
        if (p.q3r_enabled && p.op && cfg.lambda != 0.0)
            p.w -= cfg.eta * (cfg.alpha * dir + cfg.lambda * p.op->apply(p.w));
        else
            p.w -= cfg.eta * cfg.alpha * dir;
    }
}

void adam_step(const std::vector<ParamTensor*>& params,
               const std::vector<Matrix>& grads,
               const OptimizerConfig& cfg, long t) {
    check_step_inputs(params, grads, cfg, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        ParamTensor& p = *params[i];
        const Matrix dir = adam_direction(p, clipped(grads[i], cfg.clip_norm), cfg, t);
        p.w -= cfg.eta * cfg.alpha * dir;
    }
}

void adam_with_q3r_in_loss_step(const std::vector<ParamTensor*>& params,
                                const std::vector<Matrix>& grads,
                                const OptimizerConfig& cfg, long t) {
    check_step_inputs(params, grads, cfg, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        ParamTensor& p = *params[i];
        refresh_if_due(p, t, cfg.period);
        Matrix g = clipped(grads[i], cfg.clip_norm);
        if (p.q3r_enabled && p.op && cfg.lambda != 0.0)
            g += cfg.lambda * p.op->apply(p.w);
        const Matrix dir = adam_direction(p, g, cfg, t);
        p.w -= cfg.eta * cfg.alpha * dir;
    }
}

} // namespace q3r
