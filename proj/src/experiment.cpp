#include "q3r/experiment.hpp"

#include "q3r/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

namespace q3r {

namespace {

std::string fmt_cell(double x) {
    if (!std::isfinite(x))
        throw NumericError("non-finite value in CSV output");
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", x);
    return buf;
}

class PhaseTimer {
public:
    explicit PhaseTimer(std::string label)
        : label_(std::move(label)), start_(std::chrono::steady_clock::now()) {}
    ~PhaseTimer() {
        const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                            std::chrono::steady_clock::now() - start_)
                            .count();
        std::cerr << "[timing] " << label_ << " " << ms << " ms\n";
    }

private:
    std::string label_;
    std::chrono::steady_clock::time_point start_;
};

bool layer_is_targeted(const Layer& layer, ApplyTo apply) {
    if (apply == ApplyTo::None)
        return false;
    if (std::holds_alternative<DenseLayer>(layer.impl))
        return apply != ApplyTo::Attention &&
               !std::get<DenseLayer>(layer.impl).is_head;
    if (std::holds_alternative<AttentionLayer>(layer.impl))
        return apply != ApplyTo::Dense;
    return false;
}

// Marks the tensors the regularizer acts on. Dense heads and biases are
// always exempt; factorized layers are already rank-bounded by construction.
std::vector<std::string> enable_targets(Net& net, const ExperimentConfig& cfg) {
    std::vector<std::string> names;
    for (Layer& layer : net.layers) {
        if (!layer_is_targeted(layer, cfg.apply_to))
            continue;
        if (auto* dense = std::get_if<DenseLayer>(&layer.impl)) {
            enable_q3r(dense->w, cfg.target, cfg.opt.eps_floor);
            names.push_back(dense->w.name);
        } else if (auto* attn = std::get_if<AttentionLayer>(&layer.impl)) {
            for (ParamTensor* p : {&attn->wq, &attn->wk, &attn->wv, &attn->wo}) {
                enable_q3r(*p, cfg.target, cfg.opt.eps_floor);
                names.push_back(p->name);
            }
        }
    }
    return names;
}

Batch slice(const Batch& src, const std::vector<Index>& order, Index begin, Index end) {
    Batch out;
    for (Index i = begin; i < end; ++i) {
        out.inputs.push_back(src.inputs[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]);
        out.labels.push_back(src.labels[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]);
    }
    return out;
}

} // namespace

Dataset load_dataset(const ExperimentConfig& cfg) {
    if (cfg.task == TaskKind::MatrixRecover)
        throw ConfigError("matrix_recover runs have no sample dataset");
    SyntheticTeacherSpec spec = cfg.data;
    spec.seed = cfg.seed;
    if (cfg.task == TaskKind::AttentionToy)
        return gen_attention_dataset(spec);
    return gen_teacher_dataset(spec);
}

TrainOutcome run_training(const ExperimentConfig& cfg) {
    PhaseTimer timer("train");
    TrainOutcome out;
    out.data = load_dataset(cfg);
    out.net = make_net(cfg.net, cfg.seed + 1);
    if (cfg.optimizer != OptimizerKind::Adam)
        out.q3r_names = enable_targets(out.net, cfg);

    const std::vector<ParamTensor*> params = out.net.params();
    const Index n = out.data.train.size();
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::mt19937_64 shuffle_rng(cfg.seed + 0x9e3779b97f4a7c15ull);

    long step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double loss_sum = 0.0;
        long batches = 0;
        for (Index begin = 0; begin < n; begin += cfg.batch_size) {
            const Index end = std::min(n, begin + cfg.batch_size);
            const Batch batch = slice(out.data.train, order, begin, end);
            BackwardResult bw = backward(out.net, batch, cfg.loss_kind());
            switch (cfg.optimizer) {
            case OptimizerKind::AdamQ3R:
                adamq3r_step(params, bw.grads, cfg.opt, step);
                break;
            case OptimizerKind::Adam:
                adam_step(params, bw.grads, cfg.opt, step);
                break;
            case OptimizerKind::AdamQ3RInLoss:
                adam_with_q3r_in_loss_step(params, bw.grads, cfg.opt, step);
                break;
            }
            ++step;
            loss_sum += bw.loss;
            ++batches;
        }

        EpochRow row;
        row.epoch = epoch;
        row.train_loss = loss_sum / static_cast<double>(batches);
        const EvalMetrics ev = evaluate(out.net, out.data.eval, cfg.loss_kind());
        row.eval_loss = ev.loss;
        row.eval_accuracy = ev.accuracy;
        for (const std::string& name : out.q3r_names) {
            ParamTensor* p = out.net.find(name);
            row.eps.push_back(p->op ? p->op->eps() : 0.0);
            row.r_env.push_back(p->op ? static_cast<double>(p->op->rank_envelope()) : 0.0);
            row.tail.push_back(tail_ratio(p->w, p->smoothing.r_target));
            row.penalty.push_back(p->op ? p->op->q3r_value(p->w) : 0.0);
        }
        out.log.push_back(std::move(row));
    }

    out.final_eval = evaluate(out.net, out.data.eval, cfg.loss_kind());
    return out;
}

std::string train_log_csv(const TrainOutcome& outcome) {
    std::ostringstream csv;
    csv << "epoch,train_loss,eval_loss,eval_accuracy";
    for (const std::string& name : outcome.q3r_names)
        csv << "," << name << ".eps"
            << "," << name << ".r_env"
            << "," << name << ".tail"
            << "," << name << ".penalty";
    csv << "\n";
    for (const EpochRow& row : outcome.log) {
        csv << row.epoch << "," << fmt_cell(row.train_loss) << ","
            << fmt_cell(row.eval_loss) << "," << fmt_cell(row.eval_accuracy);
        for (std::size_t i = 0; i < outcome.q3r_names.size(); ++i)
            csv << "," << fmt_cell(row.eps[i]) << "," << fmt_cell(row.r_env[i])
                << "," << fmt_cell(row.tail[i]) << "," << fmt_cell(row.penalty[i]);
        csv << "\n";
    }
    return csv.str();
}

std::string truncation_csv(const std::vector<TruncationReport>& reports) {
    std::ostringstream csv;
    csv << "retention,eval_loss,eval_accuracy\n";
    for (const TruncationReport& r : reports)
        csv << fmt_cell(r.retention) << "," << fmt_cell(r.eval_loss) << ","
            << fmt_cell(r.eval_accuracy) << "\n";
    return csv.str();
}

std::string truncation_tensors_csv(const std::vector<TruncationReport>& reports) {
    std::ostringstream csv;
    csv << "retention,tensor,rank,tail_ratio\n";
    for (const TruncationReport& r : reports)
        for (const TruncatedTensor& t : r.tensors)
            csv << fmt_cell(r.retention) << "," << t.name << "," << t.rank << ","
                << fmt_cell(t.tail) << "\n";
    return csv.str();
}

std::string resolve_output_dir(const std::string& config_value,
                               const std::string& flag_value) {
    if (!flag_value.empty())
        return flag_value;
    if (const char* env = std::getenv("Q3R_OUTPUT_DIR"); env != nullptr && *env != '\0')
        return env;
    return config_value;
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw ConfigError("cannot write " + path.string());
    out << content;
    if (!out)
        throw ConfigError("write failed for " + path.string());
}

std::filesystem::path prepare_dir(const std::string& dir) {
    const std::filesystem::path p(dir);
    std::filesystem::create_directories(p);
    return p;
}

} // namespace

int cmd_train(const std::string& config_path, const std::string& out_flag) {
    const std::string text = read_text_file(config_path);
    const ExperimentConfig cfg = parse_config_text(text);

    if (cfg.task == TaskKind::MatrixRecover) {
        RecoveryConfig rc;
        rc.d1 = cfg.recover.d1;
        rc.d2 = cfg.recover.d2;
        rc.rank = cfg.recover.rank;
        rc.oversampling = cfg.recover.oversampling;
        rc.lambda = cfg.opt.lambda;
        rc.r_target = cfg.target.resolve(rc.d1, rc.d2);
        rc.iters = cfg.recover.iters;
        rc.seed = cfg.seed;
        rc.opt = cfg.opt;
        return cmd_recover(rc, out_flag, cfg.output_dir);
    }

    const auto dir = prepare_dir(resolve_output_dir(cfg.output_dir, out_flag));

    TrainOutcome outcome = run_training(cfg);

    CheckpointMeta meta;
    meta.eval_loss = outcome.final_eval.loss;
    meta.eval_accuracy = outcome.final_eval.accuracy;
    save_checkpoint((dir / "checkpoint.q3r").string(), outcome.net, text, meta);
    write_file(dir / "train_log.csv", train_log_csv(outcome));

    std::cout << "eval_loss=" << fmt_cell(outcome.final_eval.loss)
              << " eval_accuracy=" << fmt_cell(outcome.final_eval.accuracy) << "\n";
    return 0;
}

int cmd_truncate(const std::string& ckpt_path, const std::string& retain,
                 const std::string& targets, const std::string& out_flag) {
    PhaseTimer timer("truncate");
    LoadedCheckpoint ck = load_checkpoint(ckpt_path);

    std::vector<double> retentions = ck.config.retentions;
    if (!retain.empty()) {
        retentions.clear();
        std::istringstream ls(retain);
        std::string tok;
        while (std::getline(ls, tok, ',')) {
            double p = 0.0;
            try {
                std::size_t used = 0;
                p = std::stod(tok, &used);
                if (used != tok.size())
                    throw std::invalid_argument(tok);
            } catch (const std::exception&) {
                throw ConfigError("bad retention value: " + tok);
            }
            if (p <= 0.0 || p > 1.0)
                throw ConfigError("retention must be in (0, 1]");
            retentions.push_back(p);
        }
        if (retentions.empty())
            throw ConfigError("no retention values given");
    }
    TruncationTargets tt = ck.config.trunc_targets;
    if (!targets.empty()) {
        if (targets == "dense")
            tt = TruncationTargets::Dense;
        else if (targets == "attention")
            tt = TruncationTargets::Attention;
        else if (targets == "dense_attention")
            tt = TruncationTargets::DenseAndAttention;
        else
            throw ConfigError("bad truncation targets: " + targets);
    }

    const Dataset data = load_dataset(ck.config);
    const std::vector<TruncationReport> reports = truncation_sweep(
        ck.net, data.eval, ck.config.loss_kind(), retentions, tt);

    const auto dir = prepare_dir(resolve_output_dir(ck.config.output_dir, out_flag));
    write_file(dir / "truncation.csv", truncation_csv(reports));
    write_file(dir / "truncation_tensors.csv", truncation_tensors_csv(reports));

    for (const TruncationReport& r : reports)
        std::cout << "retention=" << fmt_cell(r.retention)
                  << " eval_accuracy=" << fmt_cell(r.eval_accuracy) << "\n";
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& grid,
              const std::string& out_flag) {
    PhaseTimer timer("sweep");
    const std::string base_text = read_text_file(config_path);
    const ExperimentConfig base = parse_config_text(base_text);
    const std::vector<SweepCell> cells = expand_grid(grid);
    const auto dir = prepare_dir(resolve_output_dir(base.output_dir, out_flag));

    std::ostringstream csv;
    csv << "lambda,period,retention,eval_loss,eval_accuracy,status\n";
    for (const SweepCell& cell : cells) {
        const std::string cell_text = base_text + cell.overrides;
        try {
            const ExperimentConfig cfg = parse_config_text(cell_text);
            TrainOutcome outcome = run_training(cfg);

            csv << fmt_cell(cfg.opt.lambda) << "," << cfg.opt.period << ",1,"
                << fmt_cell(outcome.final_eval.loss) << ","
                << fmt_cell(outcome.final_eval.accuracy) << ",ok\n";

            const std::vector<TruncationReport> reports =
                truncation_sweep(outcome.net, outcome.data.eval, cfg.loss_kind(),
                                 cfg.retentions, cfg.trunc_targets);
            for (const TruncationReport& r : reports)
                csv << fmt_cell(cfg.opt.lambda) << "," << cfg.opt.period << ","
                    << fmt_cell(r.retention) << "," << fmt_cell(r.eval_loss) << ","
                    << fmt_cell(r.eval_accuracy) << ",ok\n";
        } catch (const std::exception& e) {
            std::cerr << "sweep cell failed (" << cell.label << "): " << e.what()
                      << "\n";
            csv << cell.lambda << "," << cell.period << ",,,,failed\n";
        }
    }
    write_file(dir / "sweep.csv", csv.str());
    std::cout << "cells=" << cells.size() << " out=" << (dir / "sweep.csv").string()
              << "\n";
    return 0;
}

int cmd_eval(const std::string& ckpt_path) {
    LoadedCheckpoint ck = load_checkpoint(ckpt_path);
    const Dataset data = load_dataset(ck.config);
    const EvalMetrics m = evaluate(ck.net, data.eval, ck.config.loss_kind());
    std::cout << "eval_loss=" << fmt_cell(m.loss)
              << " eval_accuracy=" << fmt_cell(m.accuracy) << "\n";
    return 0;
}

int cmd_recover(const RecoveryConfig& cfg, const std::string& out_flag,
                const std::string& default_dir) {
    PhaseTimer timer("recover");
    const RecoveryReport report = run_matrix_recovery(cfg);

    const std::string dir_value = resolve_output_dir(default_dir, out_flag);
    const auto dir = prepare_dir(dir_value);
    std::ostringstream csv;
    csv << "d1,d2,rank,oversampling,lambda,measurements,iters,rel_err,tail,residual,"
           "eps,r_env\n";
    csv << cfg.d1 << "," << cfg.d2 << "," << cfg.rank << ","
        << fmt_cell(cfg.oversampling) << "," << fmt_cell(cfg.lambda) << ","
        << report.measurements << "," << report.iters_run << ","
        << fmt_cell(report.rel_err) << "," << fmt_cell(report.tail) << ","
        << fmt_cell(report.residual) << "," << fmt_cell(report.eps) << ","
        << report.r_env << "\n";
    write_file(dir / "recovery.csv", csv.str());

    std::cout << "rel_err=" << fmt_cell(report.rel_err)
              << " tail=" << fmt_cell(report.tail)
              << " measurements=" << report.measurements
              << " iters=" << report.iters_run << "\n";
    return 0;
}

} // namespace q3r
