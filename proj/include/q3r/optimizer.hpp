#pragma once

#include "q3r/param.hpp"

#include <vector>

namespace q3r {

struct OptimizerConfig {
    double alpha = 0.001;   // Adam step size
    double beta1 = 0.9;
    double beta2 = 0.999;
    double delta = 1e-8;    // denominator stabilizer
    double eta = 3.0;       // outer step scale, multiplies both terms
    double lambda = 0.0;    // regularization strength
    long period = 5;        // operator refresh interval in steps
    double eps_floor = 1e-12;
    double clip_norm = 0.0; // per-tensor gradient clip, 0 disables

    void validate() const;
};

// One decoupled step on every tensor. t is the zero-based global step index;
// tensors with rank regularization refresh their operator whenever
// t % period == 0, so the very first step already sees an operator anchored
// at the initial weights. Moments never see the regularizer:
//   w -= eta * (alpha * mhat / (sqrt(vhat) + delta) + lambda * R(w))
void adamq3r_step(const std::vector<ParamTensor*>& params,
                  const std::vector<Matrix>& grads,
                  const OptimizerConfig& cfg, long t);

// Plain Adam baseline sharing the moment code path. Ignores lambda and all
// rank-regularization state.
void adam_step(const std::vector<ParamTensor*>& params,
               const std::vector<Matrix>& grads,
               const OptimizerConfig& cfg, long t);

// Ablation: the penalty gradient is folded into the loss gradient before the
// moments, so Adam's preconditioner rescales it. Same refresh schedule.
void adam_with_q3r_in_loss_step(const std::vector<ParamTensor*>& params,
                                const std::vector<Matrix>& grads,
                                const OptimizerConfig& cfg, long t);

} // namespace q3r
