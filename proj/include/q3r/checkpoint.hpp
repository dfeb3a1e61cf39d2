#pragma once

#include "q3r/config.hpp"
#include "q3r/tinynet.hpp"

#include <string>

namespace q3r {

// Checkpoint layout (docs/formats.md): a text header starting with the magic
// line Q3RCKPT1, meta lines, the embedded config text, one line per tensor
// (name rows cols) and per operator (name eps r_env r_target state rows cols
// f_at_anchor frob_sq), an end marker, then binary payloads in header order.
// Matrix payloads are row-major float64, little-endian. Floats in the text
// header are printed with 17 significant digits so a load/save round trip is
// byte-identical.

struct CheckpointMeta {
    double eval_loss = 0.0;
    double eval_accuracy = 0.0;
};

void save_checkpoint(const std::string& path, const Net& net,
                     const std::string& config_text, const CheckpointMeta& meta);

struct LoadedCheckpoint {
    Net net;
    ExperimentConfig config;
    std::string config_text;
    CheckpointMeta meta;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

} // namespace q3r
