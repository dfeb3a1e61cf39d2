#include "q3r/spectral.hpp"

#include "q3r/errors.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace q3r {

namespace {

void check_matrix(const Matrix& w) {
    if (w.rows() == 0 || w.cols() == 0)
        throw ConfigError("empty matrix");
    if (!w.allFinite())
        throw NumericError("non-finite matrix entries");
}

void check_eps(double eps) {
    if (std::isnan(eps) || eps <= 0.0)
        throw ConfigError("eps must be positive");
}

} // namespace

SvdResult svd_truncated(const Matrix& w, Index k) {
    check_matrix(w);
    if (k < 1)
        throw ConfigError("rank bound must be positive");
    const Index d = std::min(w.rows(), w.cols());
    const Index kept = std::min(k, d);

    Eigen::JacobiSVD<Matrix> svd(w, Eigen::ComputeThinU | Eigen::ComputeThinV);
    SvdResult out;
    out.u = svd.matrixU().leftCols(kept);
    out.s = svd.singularValues().head(kept);
    out.v = svd.matrixV().leftCols(kept);
    out.frob_sq = w.squaredNorm();
    return out;
}

Vector singular_values(const Matrix& w) {
    check_matrix(w);
    Eigen::JacobiSVD<Matrix> svd(w);
    return svd.singularValues();
}

double f_eps(double sigma, double eps) {
    check_eps(eps);
    if (std::isnan(sigma) || sigma < 0.0)
        throw ConfigError("singular value must be non-negative");
    if (sigma >= eps)
        return eps * eps * (std::log(sigma) - std::log(eps)) + 0.5 * eps * eps;
    return 0.5 * sigma * sigma;
}

double F_eps(const Matrix& w, double eps) {
    check_eps(eps);
    const Vector s = singular_values(w);
    double total = 0.0;
    for (Index i = 0; i < s.size(); ++i)
        total += f_eps(s[i], eps);
    return total;
}

Matrix grad_F_eps_oracle(const Matrix& w, double eps) {
    check_eps(eps);
    check_matrix(w);
    Eigen::JacobiSVD<Matrix> svd(w, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& s = svd.singularValues();
    Vector g(s.size());
    for (Index i = 0; i < s.size(); ++i) {
        const double scale = std::max(s[i] / eps, 1.0);
        g[i] = s[i] / (scale * scale);
    }
    return svd.matrixU() * g.asDiagonal() * svd.matrixV().transpose();
}

} // namespace q3r
