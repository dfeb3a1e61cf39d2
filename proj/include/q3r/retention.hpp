#pragma once

#include "q3r/matrix.hpp"

namespace q3r {

// Rank whose factored storage r*(d1+d2) matches a fraction p of the dense
// parameter count d1*d2, clamped to [1, min(d1, d2)].
Index rank_for_retention(Index d1, Index d2, double p);

// How an optimizer reads off the per-matrix target rank: either a fixed rank
// or a parameter-retention fraction resolved against the matrix shape.
struct RankTarget {
    enum class Kind { Absolute, Retention };

    Kind kind = Kind::Absolute;
    double value = 1.0;

    static RankTarget absolute(Index r);
    static RankTarget retention(double p);

    // Resolved target rank, kept strictly below min(d1, d2) so the smoothing
    // update can always read the (r+1)-th singular value.
    Index resolve(Index d1, Index d2) const;
};

} // namespace q3r
