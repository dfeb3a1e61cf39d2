#pragma once

#include "q3r/matrix.hpp"
#include "q3r/spectral.hpp"

#include <limits>

namespace q3r {

// Monotone smoothing schedule. eps starts unset (+inf); the first operator
// refresh pins it to the (r_target+1)-th singular value of the anchor and
// every later refresh can only shrink it, never below eps_floor.
struct SmoothingState {
    double eps = std::numeric_limits<double>::infinity();
    Index r_target = 1;
    double eps_floor = 1e-12;

    bool is_set() const { return eps != std::numeric_limits<double>::infinity(); }
};

// Linear reweighting map frozen at an anchor matrix W'. Only the directions
// whose singular value exceeds eps are stored (the eps-envelope); outside the
// envelope the map acts as the identity, so
//   R(W) = W + U S U^T W + W V S V^T + U S U^T W V S V^T
// with S = diag(eps/sigma_i - 1), entries in (-1, 0].
class ReweightingOperator {
public:
    // Operator anchored at `anchor` with a fixed smoothing width.
    static ReweightingOperator build(const Matrix& anchor, double eps);

    // R(w). Requires w to have the anchor's shape.
    Matrix apply(const Matrix& w) const;

    // (1/2) <w, R(w)>. Strictly positive for w != 0.
    double q3r_value(const Matrix& w) const;

    // Gradient of the quadratic penalty above; R is self-adjoint, so this is
    // just apply(w).
    Matrix grad_q3r(const Matrix& w) const { return apply(w); }

    // Quadratic model anchored at W': F_eps(W') + q3r(w) - q3r(W'). Agrees
    // with F_eps at the anchor and upper-bounds it elsewhere.
    double quadratic_model(const Matrix& w) const;

    double eps() const { return eps_; }
    Index rank_envelope() const { return static_cast<Index>(sigma_.size()); }
    const Matrix& u() const { return u_; }
    const Vector& sigma() const { return sigma_; }
    const Matrix& v() const { return v_; }
    double f_eps_at_anchor() const { return f_eps_at_anchor_; }
    double anchor_frob_sq() const { return anchor_frob_sq_; }
    Index rows() const { return rows_; }
    Index cols() const { return cols_; }

    // Reassembles an operator from serialized parts (checkpoint loading).
    static ReweightingOperator from_parts(Matrix u, Vector sigma, Matrix v,
                                          double eps, Index rows, Index cols,
                                          double f_eps_at_anchor,
                                          double anchor_frob_sq);

    static ReweightingOperator build_from_svd(const SvdResult& svd, double eps,
                                              Index rows, Index cols);

private:
    ReweightingOperator() = default;

    Matrix u_;             // rows x r_env
    Vector sigma_;         // envelope singular values, all > eps
    Matrix v_;             // cols x r_env
    double eps_ = 0.0;
    Index rows_ = 0;
    Index cols_ = 0;
    double f_eps_at_anchor_ = 0.0;
    double anchor_frob_sq_ = 0.0;

    Vector shift() const;  // diag of S
    double q3r_at_anchor() const;
};

// One step of the smoothing schedule: shrink eps toward the (r_target+1)-th
// singular value of w, then freeze the operator at w with the new width.
std::pair<ReweightingOperator, SmoothingState>
update_operator(const Matrix& w, const SmoothingState& state);

// Fraction of squared spectral energy captured by the top r singular values.
// A zero matrix counts as fully captured.
double tail_ratio(const Matrix& w, Index r);

} // namespace q3r
