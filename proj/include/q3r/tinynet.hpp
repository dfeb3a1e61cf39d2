#pragma once

#include "q3r/param.hpp"

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace q3r {

enum class LossKind { SoftmaxCrossEntropy, MeanSquaredError };

struct DenseLayer {
    ParamTensor w;       // in x out
    ParamTensor b;       // 1 x out, never regularized
    bool is_head = false;
};

struct FactorizedDenseLayer {
    ParamTensor a;       // in x rank
    ParamTensor b;       // rank x out
};

struct ReluLayer {};

// Single-head self attention over one (seq x dim) sample:
//   softmax(X Wq (X Wk)^T / sqrt(dim)) (X Wv) Wo
struct AttentionLayer {
    ParamTensor wq;
    ParamTensor wk;
    ParamTensor wv;
    ParamTensor wo;
};

struct Layer {
    std::string name;
    std::variant<DenseLayer, FactorizedDenseLayer, ReluLayer, AttentionLayer> impl;
};

struct LayerSpec {
    enum class Kind { Dense, FactorizedDense, Relu, Attention };
    Kind kind = Kind::Dense;
    Index in = 0;
    Index out = 0;
    Index rank = 0;
    Index dim = 0;

    static LayerSpec dense(Index in, Index out);
    static LayerSpec factorized(Index in, Index rank, Index out);
    static LayerSpec relu();
    static LayerSpec attention(Index dim);
};

struct Net {
    std::vector<Layer> layers;

    // Trainable tensors in a fixed order: layer order, then declaration order
    // within the layer. Gradient vectors from backward() use the same order.
    std::vector<ParamTensor*> params();
    std::vector<const ParamTensor*> params() const;
    ParamTensor* find(const std::string& name);
};

// Weights drawn uniform(-s, s) with s = sqrt(6 / (fan_in + fan_out)), biases
// zero. The last dense layer is marked as the head.
Net make_net(const std::vector<LayerSpec>& specs, std::uint64_t seed);

// A batch of samples. Each input is one activation matrix: a 1 x features row
// for dense nets, seq x dim for attention nets. A dense layer fed a multi-row
// activation whose total size matches its fan-in flattens it row-major first.
struct Batch {
    std::vector<Matrix> inputs;
    std::vector<int> labels;  // classification targets
    Matrix targets;           // regression targets, one row per sample

    Index size() const { return static_cast<Index>(inputs.size()); }
};

// One prediction row per sample: the final activation flattened row-major.
Matrix forward(const Net& net, const std::vector<Matrix>& inputs);

double loss_value(const Matrix& preds, const Batch& batch, LossKind kind);
double accuracy(const Matrix& preds, const std::vector<int>& labels);

struct BackwardResult {
    double loss = 0.0;
    std::vector<Matrix> grads;  // aligned with net.params()
};

// Loss and its gradient with respect to every trainable tensor. The mean
// reduction over the batch is folded into the gradients.
BackwardResult backward(const Net& net, const Batch& batch, LossKind kind);

// Data loss plus lambda times the quadratic penalty of every regularized
// tensor under its current operator.
double loss_total_with_q3r(const Net& net, const Batch& batch, LossKind kind,
                           double lambda);

struct EvalMetrics {
    double loss = 0.0;
    double accuracy = 0.0;
};

EvalMetrics evaluate(const Net& net, const Batch& batch, LossKind kind);

} // namespace q3r
