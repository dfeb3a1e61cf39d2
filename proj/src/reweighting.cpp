#include "q3r/reweighting.hpp"

#include "q3r/errors.hpp"
#include "q3r/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace q3r {

namespace {

void check_eps(double eps) {
    if (std::isnan(eps) || eps <= 0.0)
        throw ConfigError("eps must be positive");
}

} // namespace

ReweightingOperator ReweightingOperator::build_from_svd(const SvdResult& svd, double eps,
                                                        Index rows, Index cols) {
    check_eps(eps);
    const Index d = svd.s.size();

    Index r_env = 0;
    while (r_env < d && svd.s[r_env] > eps)
        ++r_env;

    ReweightingOperator op;
    op.u_ = svd.u.leftCols(r_env);
    op.sigma_ = svd.s.head(r_env);
    op.v_ = svd.v.leftCols(r_env);
    op.eps_ = eps;
    op.rows_ = rows;
    op.cols_ = cols;
    op.anchor_frob_sq_ = svd.frob_sq;

    // F_eps(anchor) from the envelope alone: the sub-eps part of the spectrum
    // contributes quadratically, so its share is frob_sq minus the envelope
    // energy, halved.
    double value = 0.5 * (svd.frob_sq - op.sigma_.squaredNorm());
    for (Index i = 0; i < r_env; ++i)
        value += f_eps(op.sigma_[i], eps);
    op.f_eps_at_anchor_ = value;
    return op;
}

ReweightingOperator ReweightingOperator::build(const Matrix& anchor, double eps) {
    const Index d = std::min(anchor.rows(), anchor.cols());
    const SvdResult svd = svd_truncated(anchor, d);
    return build_from_svd(svd, eps, anchor.rows(), anchor.cols());
}

ReweightingOperator ReweightingOperator::from_parts(Matrix u, Vector sigma, Matrix v,
                                                    double eps, Index rows, Index cols,
                                                    double f_eps_at_anchor,
                                                    double anchor_frob_sq) {
    check_eps(eps);
    if (u.cols() != sigma.size() || v.cols() != sigma.size() ||
        u.rows() != rows || v.rows() != cols)
        throw ConfigError("inconsistent operator parts");
    ReweightingOperator op;
    op.u_ = std::move(u);
    op.sigma_ = std::move(sigma);
    op.v_ = std::move(v);
    op.eps_ = eps;
    op.rows_ = rows;
    op.cols_ = cols;
    op.f_eps_at_anchor_ = f_eps_at_anchor;
    op.anchor_frob_sq_ = anchor_frob_sq;
    return op;
}

Vector ReweightingOperator::shift() const {
    return (eps_ / sigma_.array() - 1.0).matrix();
}

Matrix ReweightingOperator::apply(const Matrix& w) const {
    if (w.rows() != rows_ || w.cols() != cols_)
        throw ConfigError("dimension mismatch");
    if (!w.allFinite())
        throw NumericError("non-finite matrix entries");
    if (sigma_.size() == 0)
        return w;

    const Vector s = shift();
    const Matrix utw = u_.transpose() * w;   // r x d2
    const Matrix wv = w * v_;                // d1 x r
    const Matrix core = utw * v_;            // r x r

    Matrix out = w;
    out.noalias() += u_ * (s.asDiagonal() * utw);
    out.noalias() += (wv * s.asDiagonal()) * v_.transpose();
    out.noalias() += u_ * (s.asDiagonal() * core * s.asDiagonal()) * v_.transpose();
    return out;
}

double ReweightingOperator::q3r_value(const Matrix& w) const {
    if (w.rows() != rows_ || w.cols() != cols_)
        throw ConfigError("dimension mismatch");
    if (!w.allFinite())
        throw NumericError("non-finite matrix entries");
    if (sigma_.size() == 0)
        return 0.5 * w.squaredNorm();

    const Vector s = shift();
    const Matrix wv = w * v_;                 // d1 x r
    const Matrix wtu = w.transpose() * u_;    // d2 x r
    const Matrix core = u_.transpose() * wv;  // r x r

    const Vector wv_sq = wv.colwise().squaredNorm().transpose();
    const Vector wtu_sq = wtu.colwise().squaredNorm().transpose();
    const Vector core_sq_s = core.array().square().matrix() * s;

    double quad = w.squaredNorm();
    quad += s.dot(core_sq_s);
    quad += s.dot(wv_sq);
    quad += s.dot(wtu_sq);
    return 0.5 * quad;
}

double ReweightingOperator::q3r_at_anchor() const {
    // At the anchor each envelope direction is reweighted to eps^2 and the
    // rest of the spectrum passes through untouched.
    const double r = static_cast<double>(sigma_.size());
    return 0.5 * (r * eps_ * eps_ + anchor_frob_sq_ - sigma_.squaredNorm());
}

double ReweightingOperator::quadratic_model(const Matrix& w) const {
    return f_eps_at_anchor_ + q3r_value(w) - q3r_at_anchor();
}

std::pair<ReweightingOperator, SmoothingState>
update_operator(const Matrix& w, const SmoothingState& state) {
    if (state.r_target < 1)
        throw ConfigError("target rank must be positive");
    if (state.r_target + 1 > std::min(w.rows(), w.cols()))
        throw ConfigError("target rank too large for matrix");
    if (!(state.eps_floor > 0.0))
        throw ConfigError("eps floor must be positive");

    const Index d = std::min(w.rows(), w.cols());
    const SvdResult svd = svd_truncated(w, d);
    const double guide = svd.s[state.r_target];
    SmoothingState next = state;
    next.eps = std::max(state.eps_floor, std::min(state.eps, guide));
    return {ReweightingOperator::build_from_svd(svd, next.eps, w.rows(), w.cols()), next};
}

double tail_ratio(const Matrix& w, Index r) {
    const Index d = std::min(w.rows(), w.cols());
    if (r < 1 || r > d)
        throw ConfigError("rank out of range");
    const Vector s = singular_values(w);
    const double total = w.squaredNorm();
    if (total == 0.0)
        return 1.0;
    // singular values at SVD roundoff level are numerical zeros; without this
    // floor a matrix of exact rank r would report a ratio just below 1
    const double floor = s[0] * std::max(w.rows(), w.cols()) *
                         std::numeric_limits<double>::epsilon();
    double tail = 0.0;
    for (Index i = r; i < d; ++i)
        if (s[i] > floor)
            tail += s[i] * s[i];
    return std::min(std::max(1.0 - tail / total, 0.0), 1.0);
}

} // namespace q3r
