#include "coordsim/stats.hpp"

#include <algorithm>
#include <cmath>

#include "coordsim/errors.hpp"

namespace coordsim {

namespace {
constexpr double kZ95 = 1.959963984540054;
}

Interval wilson_95(std::int64_t successes, std::int64_t trials) {
    if (trials < 1 || successes < 0 || successes > trials)
        throw PreconditionViolated("wilson_95: needs 0 <= successes <= trials");
    const double n = static_cast<double>(trials);
    const double p = static_cast<double>(successes) / n;
    const double z2 = kZ95 * kZ95;
    const double denom = 1.0 + z2 / n;
    const double center = (p + z2 / (2.0 * n)) / denom;
    const double half =
        kZ95 * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    // The boundary cases are exact: the interval endpoints collapse to the
    // sample proportion there.
    const double lo = successes == 0 ? 0.0 : std::max(0.0, center - half);
    const double hi = successes == trials ? 1.0 : std::min(1.0, center + half);
    return {lo, hi};
}

MeanSe mean_se(const std::vector<double>& xs) {
    if (xs.empty()) throw PreconditionViolated("mean_se: needs samples");
    double sum = 0.0;
    for (double x : xs) sum += x;
    const double mean = sum / static_cast<double>(xs.size());
    if (xs.size() == 1) return {mean, 0.0};
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    const double var = ss / static_cast<double>(xs.size() - 1);
    return {mean, std::sqrt(var / static_cast<double>(xs.size()))};
}

double median(std::vector<double> xs) {
    if (xs.empty()) throw PreconditionViolated("median: needs samples");
    const std::size_t mid = xs.size() / 2;
    std::nth_element(xs.begin(), xs.begin() + mid, xs.end());
    double hi = xs[mid];
    if (xs.size() % 2 == 1) return hi;
    double lo = *std::max_element(xs.begin(), xs.begin() + mid);
    return 0.5 * (lo + hi);
}

double chi_square_stat(const std::vector<std::int64_t>& observed,
                       const std::vector<double>& expected_prob,
                       std::int64_t trials) {
    if (observed.empty() || observed.size() != expected_prob.size())
        throw PreconditionViolated("chi_square_stat: needs matching nonempty "
                                   "cells");
    if (trials < 1) throw PreconditionViolated("chi_square_stat: needs trials");
    double stat = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        if (!(expected_prob[i] > 0.0))
            throw PreconditionViolated(
                "chi_square_stat: expected probabilities must be positive");
        const double want = expected_prob[i] * static_cast<double>(trials);
        const double diff = static_cast<double>(observed[i]) - want;
        stat += diff * diff / want;
    }
    return stat;
}

} // namespace coordsim
