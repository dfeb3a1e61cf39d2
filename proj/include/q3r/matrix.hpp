#pragma once

#include <Eigen/Dense>

#include <random>

namespace q3r {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

inline double frobenius_sq(const Matrix& w) { return w.squaredNorm(); }

// Draws are made in row-major order so the stream of samples does not depend
// on Eigen's storage layout.
inline Matrix randn(Index rows, Index cols, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, 1.0);
    Matrix out(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j)
            out(i, j) = dist(rng);
    return out;
}

inline Matrix rand_uniform(Index rows, Index cols, double lo, double hi,
                           std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(lo, hi);
    Matrix out(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j)
            out(i, j) = dist(rng);
    return out;
}

} // namespace q3r
