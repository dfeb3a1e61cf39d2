#include "q3r/tinynet.hpp"

#include "q3r/errors.hpp"

#include <cmath>
#include <random>

namespace q3r {

LayerSpec LayerSpec::dense(Index in, Index out) {
    if (in < 1 || out < 1)
        throw ConfigError("dense layer needs positive dimensions");
    LayerSpec s;
    s.kind = Kind::Dense;
    s.in = in;
    s.out = out;
    return s;
}

LayerSpec LayerSpec::factorized(Index in, Index rank, Index out) {
    if (in < 1 || rank < 1 || out < 1)
        throw ConfigError("factorized layer needs positive dimensions");
    LayerSpec s;
    s.kind = Kind::FactorizedDense;
    s.in = in;
    s.rank = rank;
    s.out = out;
    return s;
}

LayerSpec LayerSpec::relu() {
    LayerSpec s;
    s.kind = Kind::Relu;
    return s;
}

LayerSpec LayerSpec::attention(Index dim) {
    if (dim < 1)
        throw ConfigError("attention layer needs a positive dimension");
    LayerSpec s;
    s.kind = Kind::Attention;
    s.dim = dim;
    return s;
}

namespace {

Matrix glorot(Index rows, Index cols, std::mt19937_64& rng) {
    const double s = std::sqrt(6.0 / static_cast<double>(rows + cols));
    return rand_uniform(rows, cols, -s, s, rng);
}

Matrix flatten_rm(const Matrix& x) {
    Matrix out(1, x.size());
    Index k = 0;
    for (Index i = 0; i < x.rows(); ++i)
        for (Index j = 0; j < x.cols(); ++j)
            out(0, k++) = x(i, j);
    return out;
}

Matrix unflatten_rm(const Eigen::Ref<const Matrix>& row, Index rows, Index cols) {
    Matrix out(rows, cols);
    Index k = 0;
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j)
            out(i, j) = row(0, k++);
    return out;
}

Matrix softmax_rows(const Matrix& scores) {
    Matrix p(scores.rows(), scores.cols());
    for (Index i = 0; i < scores.rows(); ++i) {
        const double m = scores.row(i).maxCoeff();
        Eigen::RowVectorXd e = (scores.row(i).array() - m).exp();
        p.row(i) = e / e.sum();
    }
    return p;
}

// Per-sample, per-layer intermediates kept for the backward pass.
struct Trace {
    Matrix in;          // layer input after any flattening
    Index orig_rows = 0;
    Index orig_cols = 0; // nonzero when the input was flattened
    Matrix t;           // factorized: in * a
    Matrix q, k, vv, p, y; // attention pieces, y = p * vv
};

Matrix maybe_flatten(const Matrix& x, Index fan_in, const std::string& name,
                     Trace* trace) {
    if (x.cols() == fan_in)
        return x;
    if (x.size() == fan_in) {
        if (trace) {
            trace->orig_rows = x.rows();
            trace->orig_cols = x.cols();
        }
        return flatten_rm(x);
    }
    throw ConfigError("dimension mismatch at " + name);
}

Matrix layer_forward(const Layer& layer, const Matrix& x, Trace* trace) {
    return std::visit(
        [&](const auto& l) -> Matrix {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, DenseLayer>) {
                Matrix x2 = maybe_flatten(x, l.w.w.rows(), layer.name, trace);
                if (trace)
                    trace->in = x2;
                Matrix out = x2 * l.w.w;
                out.rowwise() += l.b.w.row(0);
                return out;
            } else if constexpr (std::is_same_v<T, FactorizedDenseLayer>) {
                Matrix x2 = maybe_flatten(x, l.a.w.rows(), layer.name, trace);
                Matrix t = x2 * l.a.w;
                if (trace) {
                    trace->in = x2;
                    trace->t = t;
                }
                return t * l.b.w;
            } else if constexpr (std::is_same_v<T, ReluLayer>) {
                if (trace)
                    trace->in = x;
                return x.cwiseMax(0.0);
            } else {
                if (x.cols() != l.wq.w.rows())
                    throw ConfigError("dimension mismatch at " + layer.name);
                const double scale = 1.0 / std::sqrt(static_cast<double>(x.cols()));
                Matrix q = x * l.wq.w;
                Matrix k = x * l.wk.w;
                Matrix vv = x * l.wv.w;
                Matrix p = softmax_rows(q * k.transpose() * scale);
                Matrix y = p * vv;
                if (trace) {
                    trace->in = x;
                    trace->q = q;
                    trace->k = k;
                    trace->vv = vv;
                    trace->p = p;
                    trace->y = y;
                }
                return y * l.wo.w;
            }
        },
        layer.impl);
}

struct ForwardPass {
    Matrix preds;
    std::vector<std::vector<Trace>> traces; // [layer][sample]
    std::vector<Matrix> finals;             // final activation per sample
};

ForwardPass run_forward(const Net& net, const std::vector<Matrix>& inputs,
                        bool keep_traces) {
    if (inputs.empty())
        throw ConfigError("empty batch");
    ForwardPass fp;
    if (keep_traces)
        fp.traces.assign(net.layers.size(), std::vector<Trace>(inputs.size()));
    fp.finals.resize(inputs.size());

    for (std::size_t n = 0; n < inputs.size(); ++n) {
        Matrix act = inputs[n];
        for (std::size_t li = 0; li < net.layers.size(); ++li) {
            Trace* tr = keep_traces ? &fp.traces[li][n] : nullptr;
            act = layer_forward(net.layers[li], act, tr);
        }
        fp.finals[n] = act;
    }

    const Index width = fp.finals[0].size();
    fp.preds.resize(static_cast<Index>(inputs.size()), width);
    for (std::size_t n = 0; n < inputs.size(); ++n) {
        if (fp.finals[n].size() != width)
            throw ConfigError("inconsistent output widths across samples");
        fp.preds.row(n) = flatten_rm(fp.finals[n]).row(0);
    }
    if (!fp.preds.allFinite())
        throw NumericError("non-finite activations");
    return fp;
}

// d(loss)/d(layer input) given d(loss)/d(layer output); accumulates parameter
// gradients for one sample.
Matrix layer_backward(const Layer& layer, const Trace& tr, const Matrix& d,
                      std::vector<Matrix>& grads, std::size_t& gi) {
    return std::visit(
        [&](const auto& l) -> Matrix {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, DenseLayer>) {
                grads[gi] += tr.in.transpose() * d;
                grads[gi + 1] += d.colwise().sum();
                gi += 2;
                Matrix dx = d * l.w.w.transpose();
                if (tr.orig_rows > 0)
                    return unflatten_rm(dx, tr.orig_rows, tr.orig_cols);
                return dx;
            } else if constexpr (std::is_same_v<T, FactorizedDenseLayer>) {
                grads[gi] += tr.in.transpose() * (d * l.b.w.transpose());
                grads[gi + 1] += tr.t.transpose() * d;
                gi += 2;
                Matrix dx = d * l.b.w.transpose() * l.a.w.transpose();
                if (tr.orig_rows > 0)
                    return unflatten_rm(dx, tr.orig_rows, tr.orig_cols);
                return dx;
            } else if constexpr (std::is_same_v<T, ReluLayer>) {
                return (tr.in.array() > 0.0).select(d, Matrix::Zero(d.rows(), d.cols()));
            } else {
                const double scale = 1.0 / std::sqrt(static_cast<double>(tr.in.cols()));
                grads[gi + 3] += tr.y.transpose() * d;       // wo
                const Matrix dy = d * l.wo.w.transpose();
                const Matrix dp = dy * tr.vv.transpose();
                const Matrix dvv = tr.p.transpose() * dy;
                // softmax rows: ds = p .* (dp - rowsum(dp .* p))
                const Vector row_dot = (dp.cwiseProduct(tr.p)).rowwise().sum();
                Matrix ds = tr.p.cwiseProduct(dp.colwise() - row_dot);
                ds *= scale;
                const Matrix dq = ds * tr.k;
                const Matrix dk = ds.transpose() * tr.q;
                grads[gi] += tr.in.transpose() * dq;         // wq
                grads[gi + 1] += tr.in.transpose() * dk;     // wk
                grads[gi + 2] += tr.in.transpose() * dvv;    // wv
                gi += 4;
                return dq * l.wq.w.transpose() + dk * l.wk.w.transpose() +
                       dvv * l.wv.w.transpose();
            }
        },
        layer.impl);
}

Matrix loss_grad(const Matrix& preds, const Batch& batch, LossKind kind) {
    const double n = static_cast<double>(preds.rows());
    if (kind == LossKind::SoftmaxCrossEntropy) {
        Matrix g = softmax_rows(preds);
        for (Index i = 0; i < preds.rows(); ++i)
            g(i, batch.labels[static_cast<std::size_t>(i)]) -= 1.0;
        return g / n;
    }
    return (preds - batch.targets) / n;
}

void check_loss_inputs(const Matrix& preds, const Batch& batch, LossKind kind) {
    if (kind == LossKind::SoftmaxCrossEntropy) {
        if (static_cast<Index>(batch.labels.size()) != preds.rows())
            throw ConfigError("one label per sample expected");
        for (int y : batch.labels)
            if (y < 0 || y >= preds.cols())
                throw ConfigError("label out of range");
    } else {
        if (batch.targets.rows() != preds.rows() || batch.targets.cols() != preds.cols())
            throw ConfigError("target shape mismatch");
    }
}

} // namespace

std::vector<ParamTensor*> Net::params() {
    std::vector<ParamTensor*> out;
    for (Layer& layer : layers) {
        std::visit(
            [&](auto& l) {
                using T = std::decay_t<decltype(l)>;
                if constexpr (std::is_same_v<T, DenseLayer>) {
                    out.push_back(&l.w);
                    out.push_back(&l.b);
                } else if constexpr (std::is_same_v<T, FactorizedDenseLayer>) {
                    out.push_back(&l.a);
                    out.push_back(&l.b);
                } else if constexpr (std::is_same_v<T, AttentionLayer>) {
                    out.push_back(&l.wq);
                    out.push_back(&l.wk);
                    out.push_back(&l.wv);
                    out.push_back(&l.wo);
                }
            },
            layer.impl);
    }
    return out;
}

std::vector<const ParamTensor*> Net::params() const {
    std::vector<const ParamTensor*> out;
    for (const ParamTensor* p : const_cast<Net*>(this)->params())
        out.push_back(p);
    return out;
}

ParamTensor* Net::find(const std::string& name) {
    for (ParamTensor* p : params())
        if (p->name == name)
            return p;
    return nullptr;
}

Net make_net(const std::vector<LayerSpec>& specs, std::uint64_t seed) {
    if (specs.empty())
        throw ConfigError("net needs at least one layer");
    std::mt19937_64 rng(seed);
    Net net;
    std::size_t last_dense = specs.size();
    for (std::size_t i = 0; i < specs.size(); ++i)
        if (specs[i].kind == LayerSpec::Kind::Dense)
            last_dense = i;

    for (std::size_t i = 0; i < specs.size(); ++i) {
        const LayerSpec& s = specs[i];
        Layer layer;
        const std::string idx = std::to_string(i);
        switch (s.kind) {
        case LayerSpec::Kind::Dense: {
            layer.name = "dense" + idx;
            DenseLayer l;
            l.w = make_param(layer.name + ".W", glorot(s.in, s.out, rng));
            l.b = make_param(layer.name + ".b", Matrix::Zero(1, s.out));
            l.is_head = (i == last_dense);
            layer.impl = std::move(l);
            break;
        }
        case LayerSpec::Kind::FactorizedDense: {
            layer.name = "fact" + idx;
            FactorizedDenseLayer l;
            l.a = make_param(layer.name + ".A", glorot(s.in, s.rank, rng));
            l.b = make_param(layer.name + ".B", glorot(s.rank, s.out, rng));
            layer.impl = std::move(l);
            break;
        }
        case LayerSpec::Kind::Relu:
            layer.name = "relu" + idx;
            layer.impl = ReluLayer{};
            break;
        case LayerSpec::Kind::Attention: {
            layer.name = "attn" + idx;
            AttentionLayer l;
            l.wq = make_param(layer.name + ".Wq", glorot(s.dim, s.dim, rng));
            l.wk = make_param(layer.name + ".Wk", glorot(s.dim, s.dim, rng));
            l.wv = make_param(layer.name + ".Wv", glorot(s.dim, s.dim, rng));
            l.wo = make_param(layer.name + ".Wo", glorot(s.dim, s.dim, rng));
            layer.impl = std::move(l);
            break;
        }
        }
        net.layers.push_back(std::move(layer));
    }
    return net;
}

Matrix forward(const Net& net, const std::vector<Matrix>& inputs) {
    return run_forward(net, inputs, false).preds;
}

double loss_value(const Matrix& preds, const Batch& batch, LossKind kind) {
    check_loss_inputs(preds, batch, kind);
    const double n = static_cast<double>(preds.rows());
    if (kind == LossKind::SoftmaxCrossEntropy) {
        double total = 0.0;
        for (Index i = 0; i < preds.rows(); ++i) {
            const double m = preds.row(i).maxCoeff();
            const double lse = m + std::log((preds.row(i).array() - m).exp().sum());
            total += lse - preds(i, batch.labels[static_cast<std::size_t>(i)]);
        }
        return total / n;
    }
    return 0.5 * (preds - batch.targets).squaredNorm() / n;
}

double accuracy(const Matrix& preds, const std::vector<int>& labels) {
    if (static_cast<Index>(labels.size()) != preds.rows())
        throw ConfigError("one label per sample expected");
    Index hits = 0;
    for (Index i = 0; i < preds.rows(); ++i) {
        Index arg = 0;
        preds.row(i).maxCoeff(&arg);
        if (arg == labels[static_cast<std::size_t>(i)])
            ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(preds.rows());
}

BackwardResult backward(const Net& net, const Batch& batch, LossKind kind) {
    ForwardPass fp = run_forward(net, batch.inputs, true);
    check_loss_inputs(fp.preds, batch, kind);

    BackwardResult out;
    out.loss = loss_value(fp.preds, batch, kind);
    const std::vector<const ParamTensor*> ps = net.params();
    out.grads.reserve(ps.size());
    for (const ParamTensor* p : ps)
        out.grads.emplace_back(Matrix::Zero(p->w.rows(), p->w.cols()));

    std::vector<std::size_t> offsets(net.layers.size(), 0);
    {
        std::size_t gi = 0;
        for (std::size_t li = 0; li < net.layers.size(); ++li) {
            offsets[li] = gi;
            std::visit(
                [&](const auto& l) {
                    using T = std::decay_t<decltype(l)>;
                    if constexpr (std::is_same_v<T, DenseLayer> ||
                                  std::is_same_v<T, FactorizedDenseLayer>)
                        gi += 2;
                    else if constexpr (std::is_same_v<T, AttentionLayer>)
                        gi += 4;
                },
                net.layers[li].impl);
        }
    }

    const Matrix dpred = loss_grad(fp.preds, batch, kind);
    for (Index n = 0; n < fp.preds.rows(); ++n) {
        Matrix d = unflatten_rm(dpred.row(n), fp.finals[static_cast<std::size_t>(n)].rows(),
                                fp.finals[static_cast<std::size_t>(n)].cols());
        for (std::size_t li = net.layers.size(); li-- > 0;) {
            std::size_t gi = offsets[li];
            d = layer_backward(net.layers[li], fp.traces[li][static_cast<std::size_t>(n)],
                               d, out.grads, gi);
        }
    }
    return out;
}

double loss_total_with_q3r(const Net& net, const Batch& batch, LossKind kind,
                           double lambda) {
    const Matrix preds = forward(net, batch.inputs);
    double total = loss_value(preds, batch, kind);
    for (const ParamTensor* p : net.params()) {
        if (!p->q3r_enabled)
            continue;
        if (!p->op)
            throw ConfigError("missing operator for " + p->name);
        total += lambda * p->op->q3r_value(p->w);
    }
    return total;
}

EvalMetrics evaluate(const Net& net, const Batch& batch, LossKind kind) {
    const Matrix preds = forward(net, batch.inputs);
    EvalMetrics m;
    m.loss = loss_value(preds, batch, kind);
    if (kind == LossKind::SoftmaxCrossEntropy)
        m.accuracy = accuracy(preds, batch.labels);
    return m;
}

} // namespace q3r
