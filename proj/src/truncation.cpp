#include "q3r/truncation.hpp"

#include "q3r/errors.hpp"
#include "q3r/spectral.hpp"

#include <algorithm>

namespace q3r {

Matrix truncate_matrix(const Matrix& w, Index r) {
    if (r < 1 || r > std::min(w.rows(), w.cols()))
        throw ConfigError("rank out of range");
    const SvdResult svd = svd_truncated(w, r);
    return svd.u * svd.s.asDiagonal() * svd.v.transpose();
}

bool targets_tensor(const Net& net, const ParamTensor& p, TruncationTargets targets) {
    const ParamTensor* ptr = &p;
    for (const Layer& layer : net.layers) {
        bool hit = false;
        std::visit(
            [&](const auto& l) {
                using T = std::decay_t<decltype(l)>;
                if constexpr (std::is_same_v<T, DenseLayer>) {
                    if (&l.w == ptr)
                        hit = !l.is_head && targets != TruncationTargets::Attention;
                } else if constexpr (std::is_same_v<T, AttentionLayer>) {
                    if (&l.wq == ptr || &l.wk == ptr || &l.wv == ptr || &l.wo == ptr)
                        hit = targets != TruncationTargets::Dense;
                }
            },
            layer.impl);
        if (hit)
            return true;
    }
    return false;
}

TruncationReport truncate_and_eval(const Net& net, const Batch& eval_data,
                                   LossKind kind, double retention,
                                   TruncationTargets targets) {
    Net cut = net;
    TruncationReport report;
    report.retention = retention;

    for (ParamTensor* p : cut.params()) {
        if (!targets_tensor(cut, *p, targets))
            continue;
        const Index r = rank_for_retention(p->w.rows(), p->w.cols(), retention);
        TruncatedTensor entry;
        entry.name = p->name;
        entry.rank = r;
        entry.tail = tail_ratio(p->w, r);
        p->w = truncate_matrix(p->w, r);
        report.tensors.push_back(std::move(entry));
    }

    const EvalMetrics m = evaluate(cut, eval_data, kind);
    report.eval_loss = m.loss;
    report.eval_accuracy = m.accuracy;
    return report;
}

std::vector<TruncationReport> truncation_sweep(const Net& net, const Batch& eval_data,
                                               LossKind kind,
                                               const std::vector<double>& retentions,
                                               TruncationTargets targets) {
    std::vector<TruncationReport> out;
    out.reserve(retentions.size());
    for (double p : retentions)
        out.push_back(truncate_and_eval(net, eval_data, kind, p, targets));
    return out;
}

} // namespace q3r
