#pragma once

#include "q3r/dataset.hpp"
#include "q3r/optimizer.hpp"
#include "q3r/truncation.hpp"

#include <string>
#include <vector>

namespace q3r {

enum class TaskKind { TeacherClassify, MatrixRecover, AttentionToy };
enum class OptimizerKind { AdamQ3R, Adam, AdamQ3RInLoss };
enum class ApplyTo { None, Dense, Attention, DenseAndAttention };

// Geometry of the matrix_recover task; optimizer settings come from
// [optimizer] like every other task.
struct RecoverSettings {
    Index d1 = 32;
    Index d2 = 32;
    Index rank = 3;
    double oversampling = 4.0;
    long iters = 20000;
};

struct ExperimentConfig {
    TaskKind task = TaskKind::TeacherClassify;
    std::uint64_t seed = 1;
    std::string output_dir = "runs/out";

    SyntheticTeacherSpec data;
    std::vector<LayerSpec> net;

    OptimizerKind optimizer = OptimizerKind::AdamQ3R;
    OptimizerConfig opt;
    RankTarget target = RankTarget::retention(0.2);
    ApplyTo apply_to = ApplyTo::Dense;

    int epochs = 30;
    Index batch_size = 32;

    std::vector<double> retentions;
    TruncationTargets trunc_targets = TruncationTargets::Dense;

    RecoverSettings recover;

    LossKind loss_kind() const { return LossKind::SoftmaxCrossEntropy; }
};

// Flat key = value format grouped by [section] headers. '#' starts a comment
// line; later occurrences of a key override earlier ones; unknown keys are
// rejected, with the offending line number. experiment.seed is mandatory so
// every run is replayable. See docs/formats.md for the full key list.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);

std::string read_text_file(const std::string& path);

// Grid syntax for sweeps: "lambda=0.001,0.01;period=5,25,100". Returns one
// override block per grid point, appended to the base config text.
struct SweepCell {
    std::string label;      // "lambda=0.001 period=5"
    std::string overrides;  // config text fragment
    double lambda = 0.0;
    long period = 0;
};
std::vector<SweepCell> expand_grid(const std::string& grid);

} // namespace q3r
