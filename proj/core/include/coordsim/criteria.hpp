#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "coordsim/measure.hpp"

namespace coordsim {

enum class Outcome { Positive, Negative, Inconclusive };

const char* to_string(Outcome o);

// Answer to a convergence/divergence question, with enough evidence to
// audit it: either the analytic rule that decided, or the dyadic samples
// and fitted tail exponent of the numeric classification.
struct Verdict {
    Outcome outcome = Outcome::Inconclusive;
    // Analytic rule that decided; empty for numeric fits and for
    // Inconclusive results.
    std::string shortcut;
    // Dyadic (argument, value) samples backing a numeric verdict.
    std::vector<std::pair<double, double>> points;
    // Running sums of the tested series at the sampled points.
    std::vector<double> partial_sums;
    // Exact series value when a shortcut provides one.
    double series_sum = std::numeric_limits<double>::quiet_NaN();
    // Tail exponent: fitted by log-log regression on numeric paths,
    // analytic on kernel shortcuts.
    double exponent = std::numeric_limits<double>::quiet_NaN();
    double exponent_se = std::numeric_limits<double>::quiet_NaN();
};

enum class StrengthTest { AtomAtZero, NegLog, SeriesAlpha, Unknown };

// How a strength question against a given coalescence measure resolves.
struct StrengthQuery {
    RegularityProfile profile;
    StrengthTest used = StrengthTest::Unknown;
};

// Whether the block-counting process started from infinity becomes finite
// immediately (Positive), stays infinite forever (Negative), or cannot be
// classified by the implemented tests.
Verdict comes_down(const MeasureSpec& lambda, double margin = 0.05);

// E[(1-W)^n] with W = U*Y, U uniform on [0,1] and Y distributed as the
// normalized measure (an atom at zero puts mass on Y = 0).
double moment_1mW(const MeasureSpec& m, std::int64_t n);

// E[-log Y] under the normalized measure; +infinity when there is an atom
// at zero.
double expected_neg_log(const MeasureSpec& m);

// Strength against a pure-atom coalescence measure: Positive iff
// E[-log Y] is infinite.
Verdict kingman_strong_test(const MeasureSpec& m);

// Strength against an alpha-regular coalescence measure: Positive iff
// sum_n E[(1-W)^n] / n^(alpha-1) diverges.
Verdict series_strong_test(const MeasureSpec& m, double alpha,
                           double margin = 0.05);

StrengthQuery resolve_strength_test(const MeasureSpec& mu,
                                    const MeasureSpec& lambda);

// Whether infinitely many particles would move under mu while the target
// site's coalescence measure brings its count down from infinity.
Verdict is_lambda_strong(const MeasureSpec& mu, const MeasureSpec& lambda,
                         double margin = 0.05);

} // namespace coordsim
