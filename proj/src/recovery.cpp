#include "q3r/recovery.hpp"

#include "q3r/errors.hpp"
#include "q3r/reweighting.hpp"

#include <cmath>
#include <random>

namespace q3r {

namespace {

Vector vec_rm(const Matrix& w) {
    Vector out(w.size());
    Index k = 0;
    for (Index i = 0; i < w.rows(); ++i)
        for (Index j = 0; j < w.cols(); ++j)
            out[k++] = w(i, j);
    return out;
}

Matrix unvec_rm(const Vector& v, Index rows, Index cols) {
    Matrix out(rows, cols);
    Index k = 0;
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j)
            out(i, j) = v[k++];
    return out;
}

} // namespace

RecoveryReport run_matrix_recovery(const RecoveryConfig& cfg) {
    if (cfg.d1 < 2 || cfg.d2 < 2)
        throw ConfigError("recovery needs at least 2x2 matrices");
    if (cfg.rank < 1 || cfg.rank > std::min(cfg.d1, cfg.d2))
        throw ConfigError("rank out of range");
    if (!(cfg.oversampling > 0.0))
        throw ConfigError("oversampling must be positive");
    if (cfg.iters < 1)
        throw ConfigError("iteration budget must be positive");
    cfg.opt.validate();

    const Index n = cfg.d1 * cfg.d2;
    const double dof = static_cast<double>(cfg.rank) *
                       static_cast<double>(cfg.d1 + cfg.d2 - cfg.rank);
    const Index m = static_cast<Index>(std::ceil(cfg.oversampling * dof));
    if (m > n)
        throw ConfigError("infeasible oversampling");

    std::mt19937_64 rng(cfg.seed);
    const double rscale = 1.0 / std::sqrt(static_cast<double>(cfg.rank));
    const Matrix truth =
        randn(cfg.d1, cfg.rank, rng) * randn(cfg.rank, cfg.d2, rng).eval() * rscale;

    Matrix sensing = randn(m, n, rng) / std::sqrt(static_cast<double>(m));
    const Vector y = sensing * vec_rm(truth);

    // Unit-variance init matches the scale of the planted matrix, so the first
    // smoothing update anchors eps to a representative noise level instead of
    // collapsing it near zero.
    ParamTensor p = make_param("recover.W", randn(cfg.d1, cfg.d2, rng));
    OptimizerConfig opt = cfg.opt;
    opt.lambda = cfg.lambda;
    if (cfg.lambda > 0.0) {
        const Index target = cfg.r_target > 0 ? cfg.r_target : cfg.rank;
        enable_q3r(p, RankTarget::absolute(target), opt.eps_floor);
    }

    RecoveryReport report;
    report.measurements = m;

    Vector residual(m);
    long t = 0;
    for (; t < cfg.iters; ++t) {
        residual = sensing * vec_rm(p.w) - y;
        const Matrix grad = unvec_rm(sensing.transpose() * residual, cfg.d1, cfg.d2);
        // cosine step decay lets the data term settle to high precision while
        // the regularizer keeps its full strength on the sub-eps directions
        OptimizerConfig step_opt = opt;
        const double phase = static_cast<double>(t) / static_cast<double>(cfg.iters);
        step_opt.alpha = std::max(0.5 * opt.alpha * (1.0 + std::cos(phase * M_PI)),
                                  opt.alpha * 1e-9);
        adamq3r_step({&p}, {grad}, step_opt, t);
    }

    report.iters_run = t < cfg.iters ? t + 1 : cfg.iters;
    report.rel_err = (p.w - truth).norm() / truth.norm();
    report.tail = tail_ratio(p.w, cfg.rank);
    report.residual = (sensing * vec_rm(p.w) - y).norm();
    if (p.op) {
        report.eps = p.op->eps();
        report.r_env = p.op->rank_envelope();
    }
    return report;
}

} // namespace q3r
