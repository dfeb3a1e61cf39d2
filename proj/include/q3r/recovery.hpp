#pragma once

#include "q3r/optimizer.hpp"

#include <cstdint>

namespace q3r {

// Gaussian-measurement low-rank matrix recovery:
//   min_W 1/2 ||A vec(W) - y||^2 + lambda * q3r(W)
// with m = ceil(oversampling * r * (d1 + d2 - r)) sensing rows, entries
// N(0, 1/m). vec() is row-major.
struct RecoveryConfig {
    Index d1 = 32;
    Index d2 = 32;
    Index rank = 3;
    double oversampling = 4.0;
    double lambda = 1e-3;
    Index r_target = 0;      // 0: use rank
    long iters = 20000;
    std::uint64_t seed = 1;
    OptimizerConfig opt;     // alpha, eta, period, moments
};

struct RecoveryReport {
    double rel_err = 0.0;    // ||W - X*||_F / ||X*||_F
    double tail = 0.0;       // top-rank spectral energy fraction of W
    double residual = 0.0;   // ||A vec(W) - y|| at the end
    double eps = 0.0;        // final smoothing width, 0 when lambda == 0
    Index r_env = 0;
    Index measurements = 0;
    long iters_run = 0;
};

RecoveryReport run_matrix_recovery(const RecoveryConfig& cfg);

} // namespace q3r
