#pragma once

#include "q3r/checkpoint.hpp"
#include "q3r/config.hpp"
#include "q3r/dataset.hpp"
#include "q3r/recovery.hpp"
#include "q3r/truncation.hpp"

#include <string>
#include <vector>

namespace q3r {

struct EpochRow {
    int epoch = 0;
    double train_loss = 0.0;
    double eval_loss = 0.0;
    double eval_accuracy = 0.0;
    // per regularized tensor, aligned with TrainOutcome::q3r_names
    std::vector<double> eps;
    std::vector<double> r_env;
    std::vector<double> tail;
    std::vector<double> penalty;
};

struct TrainOutcome {
    Net net;
    Dataset data;
    std::vector<std::string> q3r_names;
    std::vector<EpochRow> log;
    EvalMetrics final_eval;
};

Dataset load_dataset(const ExperimentConfig& cfg);

// Deterministic training loop: fixed batch order per epoch from a seeded
// shuffle, one optimizer step per batch with a global step counter.
TrainOutcome run_training(const ExperimentConfig& cfg);

std::string train_log_csv(const TrainOutcome& outcome);
std::string truncation_csv(const std::vector<TruncationReport>& reports);
std::string truncation_tensors_csv(const std::vector<TruncationReport>& reports);

// --out flag beats Q3R_OUTPUT_DIR beats the config value.
std::string resolve_output_dir(const std::string& config_value,
                               const std::string& flag_value);

int cmd_train(const std::string& config_path, const std::string& out_flag);
int cmd_truncate(const std::string& ckpt_path, const std::string& retain,
                 const std::string& targets, const std::string& out_flag);
int cmd_sweep(const std::string& config_path, const std::string& grid,
              const std::string& out_flag);
int cmd_eval(const std::string& ckpt_path);
int cmd_recover(const RecoveryConfig& cfg, const std::string& out_flag,
                const std::string& default_dir = "runs/recover");

} // namespace q3r
