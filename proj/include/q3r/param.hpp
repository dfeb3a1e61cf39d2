#pragma once

#include "q3r/matrix.hpp"
#include "q3r/retention.hpp"
#include "q3r/reweighting.hpp"

#include <optional>
#include <string>
#include <utility>

namespace q3r {

// A trainable matrix plus its Adam moments and, when rank regularization is
// enabled, the smoothing schedule and the most recent reweighting operator.
// The operator is absent until the first refresh.
struct ParamTensor {
    std::string name;
    Matrix w;
    Matrix m;
    Matrix v;
    bool q3r_enabled = false;
    SmoothingState smoothing;
    std::optional<ReweightingOperator> op;
};

inline ParamTensor make_param(std::string name, Matrix w) {
    ParamTensor p;
    p.name = std::move(name);
    p.m = Matrix::Zero(w.rows(), w.cols());
    p.v = Matrix::Zero(w.rows(), w.cols());
    p.w = std::move(w);
    return p;
}

inline void enable_q3r(ParamTensor& p, const RankTarget& target, double eps_floor = 1e-12) {
    p.q3r_enabled = true;
    p.smoothing = SmoothingState{};
    p.smoothing.r_target = target.resolve(p.w.rows(), p.w.cols());
    p.smoothing.eps_floor = eps_floor;
    p.op.reset();
}

} // namespace q3r
