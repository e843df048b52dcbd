#pragma once

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "coordsim/criteria.hpp"

namespace coordsim::detail {

struct LogLogFit {
    double slope = 0.0;
    double slope_se = 0.0;
};

inline LogLogFit fit_loglog(const std::vector<std::pair<double, double>>& points,
                            std::size_t first, std::size_t last) {
    const std::size_t n = last - first;
    double sx = 0.0, sy = 0.0;
    for (std::size_t i = first; i < last; ++i) {
        sx += std::log(points[i].first);
        sy += std::log(points[i].second);
    }
    const double mx = sx / static_cast<double>(n);
    const double my = sy / static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = first; i < last; ++i) {
        const double dx = std::log(points[i].first) - mx;
        sxx += dx * dx;
        sxy += dx * (std::log(points[i].second) - my);
    }
    LogLogFit fit;
    fit.slope = sxy / sxx;
    double rss = 0.0;
    for (std::size_t i = first; i < last; ++i) {
        const double r = std::log(points[i].second) - my -
                         fit.slope * (std::log(points[i].first) - mx);
        rss += r * r;
    }
    if (n > 2) fit.slope_se = std::sqrt(rss / static_cast<double>(n - 2) / sxx);
    return fit;
}

// A power-law fit is only trusted when the slope is stable across the
// sampling window; log-corrected families (b log b and the like) drift by
// 0.02+ over the dyadic range.
inline constexpr double kSlopeDriftTol = 0.02;

inline constexpr std::int64_t kDyadicLo = 6;
inline constexpr std::int64_t kDyadicHi = 14;

// Classify a fitted tail exponent against a decision threshold.  When the
// half-window slopes drift, the asymptotic exponent lies beyond the late
// window in the drift direction, so only a verdict the drift reinforces is
// sound; anything else is Inconclusive rather than a guess.
inline Outcome classify_fit(double s_full, double s_lo, double s_hi, double thr,
                            double margin, Outcome above, Outcome below) {
    const double drift = s_hi - s_lo;
    if (std::fabs(drift) <= kSlopeDriftTol) {
        if (s_full > thr + margin) return above;
        if (s_full < thr - margin) return below;
        return Outcome::Inconclusive;
    }
    if (drift > 0.0 && s_hi > thr + margin) return above;
    if (drift < 0.0 && s_hi < thr - margin) return below;
    return Outcome::Inconclusive;
}

} // namespace coordsim::detail
