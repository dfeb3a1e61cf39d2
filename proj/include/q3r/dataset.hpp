#pragma once

#include "q3r/tinynet.hpp"

#include <cstdint>

namespace q3r {

// Synthetic classification data from a planted low-rank teacher. Inputs are
// standard normal; labels are the teacher's argmax, with a fraction of the
// train labels flipped to a different class. The eval split stays clean.
struct SyntheticTeacherSpec {
    Index input_dim = 32;
    Index hidden_dim = 64;
    Index num_classes = 4;
    Index teacher_rank = 4;
    Index samples = 2000;
    Index seq_len = 6;      // attention task only
    double noise_rate = 0.0;
    std::uint64_t seed = 1;
};

struct Dataset {
    Batch train;
    Batch eval;
    Net teacher;
};

// Teacher: dense(input, hidden) of the planted rank, relu, dense head.
Dataset gen_teacher_dataset(const SyntheticTeacherSpec& spec);

// Teacher: single attention block of the planted rank over (seq_len x
// input_dim) samples, flattened into a dense head.
Dataset gen_attention_dataset(const SyntheticTeacherSpec& spec);

} // namespace q3r
