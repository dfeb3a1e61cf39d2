#pragma once

#include "q3r/matrix.hpp"

namespace q3r {

struct SvdResult {
    Matrix u;       // d1 x k, orthonormal columns
    Vector s;       // k singular values, non-increasing
    Matrix v;       // d2 x k, orthonormal columns
    double frob_sq; // squared Frobenius norm of the full input matrix
};

// Top-k singular triplets of w; k is clamped to min(d1, d2). frob_sq is always
// the norm of the whole matrix, not of the kept part.
SvdResult svd_truncated(const Matrix& w, Index k);

Vector singular_values(const Matrix& w);

// Smoothed surrogate of a single singular value:
//   eps^2 (log sigma - log eps) + eps^2 / 2   if sigma >= eps
//   sigma^2 / 2                               otherwise
// Continuously differentiable at the seam, derivative eps there.
double f_eps(double sigma, double eps);

// Sum of f_eps over the spectrum of w. Equals ||w||_F^2 / 2 when every
// singular value sits at or below eps.
double F_eps(const Matrix& w, double eps);

// Gradient of F_eps through a full decomposition:
//   U diag(sigma_i / max(sigma_i / eps, 1)^2) V^T
// Reference path used by tests; the training code never calls this.
Matrix grad_F_eps_oracle(const Matrix& w, double eps);

} // namespace q3r
