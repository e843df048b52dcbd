#pragma once

#include <cstdint>
#include <vector>

#include "coordsim/graph.hpp"
#include "coordsim/measure.hpp"
#include "coordsim/rates.hpp"
#include "coordsim/sim.hpp"

namespace coordsim {

/// Monte Carlo point estimate with a 95% confidence interval: Wilson score
/// for probabilities, mean +- 2 SE for means.
struct Estimate {
    double value = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    std::int64_t reps = 0;
    std::uint64_t seed = 0;
};

/// Either the exact block-count level k (width 0) or the band
/// [level, level + width].
struct HitTarget {
    std::int64_t level = 0;
    std::int64_t width = 0;

    static HitTarget at(std::int64_t k) { return {k, 0}; }
    static HitTarget band(std::int64_t k, std::int64_t ell) {
        return {k, ell};
    }
};

/// Shared Monte Carlo knobs.  reps = 0 picks the operation default
/// (10^4 for probabilities, 10^3 for means).  Replicates are distributed
/// over `threads` workers; results are identical for any thread count
/// because each replicate derives its own stream and aggregation runs in
/// replicate order.
struct McOptions {
    std::int64_t reps = 0;
    std::uint64_t seed = 0;
    int threads = 1;
    SimOptions sim;
};

/// Probability that the embedded jump chain of a single-site coalescent
/// with death, started at n_start, visits the target (post-jump values).
/// Requires n_start > level + width.
Estimate estimate_hit_prob(const MeasureSpec& lambda, const MeasureSpec& death,
                           std::int64_t n_start, HitTarget target,
                           const McOptions& opts = {});

/// Level-hit probabilities for every level in [k_lo, k_hi], evaluated on
/// one shared path ensemble (the estimates are coupled across levels).
/// Requires 1 <= k_lo <= k_hi < n_start.
std::vector<Estimate> hit_level_profile(const MeasureSpec& lambda,
                                        const MeasureSpec& death,
                                        std::int64_t n_start,
                                        std::int64_t k_lo, std::int64_t k_hi,
                                        const McOptions& opts = {});

/// Mean number of migrated particles by time t in a two-site system where
/// only the source's coalescence/death and one migration measure act.
/// n_start replaces the source's initial count; the target starts empty.
Estimate estimate_migration_count(const SystemSpec& sys, std::int64_t n_start,
                                  double t, const McOptions& opts = {});

struct GrowthRow {
    std::int64_t n_start = 0;
    double median_count = 0.0;
    Estimate mean_count;
};

/// Migration counts across an n_start sweep with the declared finite-n
/// growth statistic: the least-squares slope of log(median + 1) against
/// log n.  Escape to the second site shows up as a slope above the
/// threshold; a saturating count stays below it.
struct GrowthTable {
    std::vector<GrowthRow> rows;
    double slope = 0.0;
    double threshold = 0.05;
    bool growing = false;
};

GrowthTable migration_growth(const SystemSpec& sys,
                             const std::vector<std::int64_t>& sweep, double t,
                             const McOptions& opts = {});

struct SpeedPoint {
    double t = 0.0;
    double mean_blocks = 0.0;
    double se = 0.0;
    /// mean_blocks * (c t / 2) with c the coalescence atom at zero; the
    /// small-t speed law drives this to 1 for a Kingman site.
    double normalized = 0.0;
};

/// Mean block count of a single-site coalescent on a time grid.  Requires
/// comes_down(lambda) Positive and strictly increasing positive times.
std::vector<SpeedPoint> estimate_block_speed(const MeasureSpec& lambda,
                                             std::int64_t n_start,
                                             const std::vector<double>& ts,
                                             const McOptions& opts = {});

struct MeanPoint {
    double t = 0.0;
    double mean_total = 0.0;
    double se = 0.0;
};

/// Mean total count across all sites on a time grid, with every site
/// started at n particles.  Requires a system with no death and no
/// reproduction (the hypothesis of the envelope comparison).
std::vector<MeanPoint> estimate_mean_total(const SystemSpec& sys,
                                           std::int64_t n,
                                           const std::vector<double>& ts,
                                           const McOptions& opts = {});

/// Empirical one-step loss distribution at count n from repeated single
/// jumps; zeta[k-1] is the observed frequency of losing exactly k.
LossDistribution zeta_empirical(const MeasureSpec& lambda,
                                const MeasureSpec& death, std::int64_t n,
                                std::int64_t samples,
                                const McOptions& opts = {});

} // namespace coordsim
