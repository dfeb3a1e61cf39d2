#include "q3r/dataset.hpp"

#include "q3r/errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace q3r {

namespace {

void check_spec(const SyntheticTeacherSpec& spec) {
    if (spec.input_dim < 1 || spec.hidden_dim < 1 || spec.num_classes < 2)
        throw ConfigError("teacher spec needs positive dims and at least two classes");
    if (spec.teacher_rank < 1)
        throw ConfigError("teacher rank must be positive");
    if (spec.samples < 10)
        throw ConfigError("need at least ten samples");
    if (spec.noise_rate < 0.0 || spec.noise_rate >= 0.5)
        throw ConfigError("noise rate must be in [0, 0.5)");
}

// Exact rank-r Gaussian product, scaled so entries have unit variance and a
// matrix product with unit-variance inputs stays O(1).
Matrix planted(Index d1, Index d2, Index r, std::mt19937_64& rng) {
    const Index rr = std::min({r, d1, d2});
    const double scale = 1.0 / std::sqrt(static_cast<double>(rr) * static_cast<double>(d1));
    return randn(d1, rr, rng) * randn(rr, d2, rng) * scale;
}

std::vector<int> label_by_argmax(const Matrix& logits) {
    std::vector<int> labels(static_cast<std::size_t>(logits.rows()));
    for (Index i = 0; i < logits.rows(); ++i) {
        Index arg = 0;
        logits.row(i).maxCoeff(&arg);
        labels[static_cast<std::size_t>(i)] = static_cast<int>(arg);
    }
    return labels;
}

Dataset split_and_flip(Net teacher, std::vector<Matrix> inputs,
                       const SyntheticTeacherSpec& spec, std::mt19937_64& rng) {
    const Matrix logits = forward(teacher, inputs);
    std::vector<int> labels = label_by_argmax(logits);

    const Index n = static_cast<Index>(inputs.size());
    const Index n_train = (n * 8) / 10;

    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::uniform_int_distribution<int> pick(0, static_cast<int>(spec.num_classes) - 2);
    for (Index i = 0; i < n_train; ++i) {
        if (spec.noise_rate > 0.0 && coin(rng) < spec.noise_rate) {
            int other = pick(rng);
            if (other >= labels[static_cast<std::size_t>(i)])
                ++other;
            labels[static_cast<std::size_t>(i)] = other;
        }
    }

    Dataset ds;
    ds.teacher = std::move(teacher);
    for (Index i = 0; i < n; ++i) {
        Batch& dst = i < n_train ? ds.train : ds.eval;
        dst.inputs.push_back(std::move(inputs[static_cast<std::size_t>(i)]));
        dst.labels.push_back(labels[static_cast<std::size_t>(i)]);
    }
    return ds;
}

} // namespace

Dataset gen_teacher_dataset(const SyntheticTeacherSpec& spec) {
    check_spec(spec);
    std::mt19937_64 rng(spec.seed);

    Net teacher = make_net({LayerSpec::dense(spec.input_dim, spec.hidden_dim),
                            LayerSpec::relu(),
                            LayerSpec::dense(spec.hidden_dim, spec.num_classes)},
                           spec.seed);
    std::get<DenseLayer>(teacher.layers[0].impl).w.w =
        planted(spec.input_dim, spec.hidden_dim, spec.teacher_rank, rng);
    std::get<DenseLayer>(teacher.layers[2].impl).w.w =
        planted(spec.hidden_dim, spec.num_classes,
                std::min(spec.hidden_dim, spec.num_classes), rng);

    std::vector<Matrix> inputs;
    inputs.reserve(static_cast<std::size_t>(spec.samples));
    for (Index i = 0; i < spec.samples; ++i)
        inputs.push_back(randn(1, spec.input_dim, rng));

    return split_and_flip(std::move(teacher), std::move(inputs), spec, rng);
}

Dataset gen_attention_dataset(const SyntheticTeacherSpec& spec) {
    check_spec(spec);
    if (spec.seq_len < 2)
        throw ConfigError("attention task needs seq_len >= 2");
    std::mt19937_64 rng(spec.seed);

    const Index dim = spec.input_dim;
    Net teacher = make_net({LayerSpec::attention(dim),
                            LayerSpec::dense(spec.seq_len * dim, spec.num_classes)},
                           spec.seed);
    AttentionLayer& attn = std::get<AttentionLayer>(teacher.layers[0].impl);
    attn.wq.w = planted(dim, dim, spec.teacher_rank, rng);
    attn.wk.w = planted(dim, dim, spec.teacher_rank, rng);
    attn.wv.w = planted(dim, dim, spec.teacher_rank, rng);
    attn.wo.w = planted(dim, dim, spec.teacher_rank, rng);

    std::vector<Matrix> inputs;
    inputs.reserve(static_cast<std::size_t>(spec.samples));
    for (Index i = 0; i < spec.samples; ++i)
        inputs.push_back(randn(spec.seq_len, dim, rng));

    return split_and_flip(std::move(teacher), std::move(inputs), spec, rng);
}

} // namespace q3r
