#pragma once

#include <cstdint>
#include <vector>

namespace coordsim {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

/// 95% Wilson score interval for a binomial proportion.
Interval wilson_95(std::int64_t successes, std::int64_t trials);

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

/// Sample mean and its standard error (zero SE for a single value).
MeanSe mean_se(const std::vector<double>& xs);

/// Median with the even-count midpoint convention.
double median(std::vector<double> xs);

/// Pearson chi-square statistic of observed counts against expected cell
/// probabilities (one probability per cell, same length, each positive).
double chi_square_stat(const std::vector<std::int64_t>& observed,
                       const std::vector<double>& expected_prob,
                       std::int64_t trials);

} // namespace coordsim
