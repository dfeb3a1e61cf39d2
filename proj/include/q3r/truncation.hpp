#pragma once

#include "q3r/retention.hpp"
#include "q3r/tinynet.hpp"

#include <string>
#include <vector>

namespace q3r {

// Which weight matrices a post-training truncation touches. Dense heads and
// biases are always left alone; factorized layers are already rank-bounded.
enum class TruncationTargets { Dense, Attention, DenseAndAttention };

struct TruncatedTensor {
    std::string name;
    Index rank = 0;         // kept rank
    double tail = 0.0;      // spectral energy fraction at that rank, pre-cut
};

struct TruncationReport {
    double retention = 0.0;
    std::vector<TruncatedTensor> tensors;
    double eval_loss = 0.0;
    double eval_accuracy = 0.0;
};

// Best rank-r approximation via the decomposition; r in [1, min(d1, d2)].
Matrix truncate_matrix(const Matrix& w, Index r);

bool targets_tensor(const Net& net, const ParamTensor& p, TruncationTargets targets);

// Copies the net, replaces every targeted matrix by its rank-r_p cut with
// r_p = rank_for_retention(shape, retention), then evaluates.
TruncationReport truncate_and_eval(const Net& net, const Batch& eval_data,
                                   LossKind kind, double retention,
                                   TruncationTargets targets);

std::vector<TruncationReport> truncation_sweep(const Net& net, const Batch& eval_data,
                                               LossKind kind,
                                               const std::vector<double>& retentions,
                                               TruncationTargets targets);

} // namespace q3r
