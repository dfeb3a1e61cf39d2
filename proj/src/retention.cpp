#include "q3r/retention.hpp"

#include "q3r/errors.hpp"

#include <algorithm>
#include <cmath>

namespace q3r {

Index rank_for_retention(Index d1, Index d2, double p) {
    if (d1 < 1 || d2 < 1)
        throw ConfigError("empty matrix");
    if (std::isnan(p) || p <= 0.0 || p > 1.0)
        throw ConfigError("retention must be in (0, 1]");
    const double dense = static_cast<double>(d1) * static_cast<double>(d2);
    const double factored = static_cast<double>(d1 + d2);
    const Index r = static_cast<Index>(std::floor(p * dense / factored));
    return std::clamp(r, Index{1}, std::min(d1, d2));
}

RankTarget RankTarget::absolute(Index r) {
    if (r < 1)
        throw ConfigError("target rank must be positive");
    return RankTarget{Kind::Absolute, static_cast<double>(r)};
}

RankTarget RankTarget::retention(double p) {
    if (std::isnan(p) || p <= 0.0 || p > 1.0)
        throw ConfigError("retention must be in (0, 1]");
    return RankTarget{Kind::Retention, p};
}

Index RankTarget::resolve(Index d1, Index d2) const {
    const Index dmin = std::min(d1, d2);
    if (dmin < 2)
        throw ConfigError("target rank too large for matrix");
    if (kind == Kind::Absolute) {
        const Index r = static_cast<Index>(value);
        if (r + 1 > dmin)
            throw ConfigError("target rank too large for matrix");
        return r;
    }
    return std::min(rank_for_retention(d1, d2, value), dmin - 1);
}

} // namespace q3r
