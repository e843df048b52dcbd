#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "coordsim/criteria.hpp"
#include "coordsim/measure.hpp"

namespace coordsim {

namespace detail {
class SiteSpeed;
}

/// Outcome of one constrained minimization over per-site allocations.
struct OmegaResult {
    double value = 0.0;
    std::vector<double> allocation;
    /// Common marginal shared by the active sites at the optimum.
    double marginal = 0.0;
    /// Worst |d/dx site speed - marginal| over interior active sites.
    double kkt_residual = 0.0;
};

/// Minimizer of the summed per-site processing speeds subject to a total
/// mass constraint.
///
/// Each site contributes the convex speed function psi of its coalescence
/// measure, taken as zero on [0, 1]: psi(0) = psi(1) = 0 with psi convex
/// forces psi <= 0 there, and a site holding at most one particle performs
/// no work, so the clip is exact for the comparison bound and keeps the
/// minimum nonnegative.  The  minimization is a water-filling problem: the
/// derivative of the clipped speed is nondecreasing, so bisection on the
/// shared marginal with per-site inversion finds the optimum.
///
/// Pure-atom-at-zero sites evaluate in closed form.  Sites with mass away
/// from zero get a monotone cubic interpolant of the speed derivative,
/// built once over [1, x_max] from central differences (relative step
/// 1e-4) of the exact quadrature-backed speed; the speed itself is the
/// exact integral of that interpolant, which keeps it convex.
class OmegaSolver {
public:
    explicit OmegaSolver(std::vector<MeasureSpec> sites, double x_max = 1e4);
    ~OmegaSolver();
    OmegaSolver(OmegaSolver&&) noexcept;
    OmegaSolver& operator=(OmegaSolver&&) noexcept;

    std::size_t size() const { return sites_.size(); }
    double x_max() const { return x_max_; }
    const MeasureSpec& site(std::size_t i) const { return sites_[i]; }

    /// Exact (unclipped) sum of per-site speeds; negative entries of the
    /// pocket on (0,1) are kept.  Requires xs nonnegative, one per site.
    double psi_sum(const std::vector<double>& xs) const;

    /// Clipped speed of one site, via the closed form or the interpolant.
    double site_speed(std::size_t i, double q) const;

    /// Minimum of the clipped speed sum over allocations of x.  Requires
    /// 0 <= x <= x_max().  Throws ConvergenceFailure if the marginal
    /// bisection cannot meet the sum tolerance.
    OmegaResult omega(double x) const;

    double omega_value(double x) const { return omega(x).value; }

private:
    std::vector<MeasureSpec> sites_;
    std::vector<detail::SiteSpeed> speeds_;
    double x_max_ = 0.0;
};

/// One-shot convenience wrapper; builds a solver sized to x.
OmegaResult omega(const std::vector<MeasureSpec>& sites, double x);

struct WnPoint {
    double t = 0.0;
    double w = 0.0;
    double omega = 0.0;
};

/// Sampled deterministic envelope of the expected total count.
struct WnCurve {
    std::vector<WnPoint> points;
    /// True when integration had to clip the state at one particle per
    /// site; the flat zero-speed zone makes this unreachable except
    /// through discretization overshoot.
    bool clipped = false;
    double dt = 0.0;
};

/// Integrates w' = -Omega(w) from w(0) = n * #sites with fixed-step RK4,
/// recording (t, w, Omega(w)) at every step.  The state is floored at one
/// particle per site.  Requires n >= 1, t_max > 0, 0 < dt <= t_max.
WnCurve solve_wn(const std::vector<MeasureSpec>& sites, std::int64_t n,
                 double t_max, double dt = 1e-4);

/// Time for the envelope to descend from w_hi to w_lo: the integral of
/// 1/Omega.  Requires #sites < w_lo <= w_hi <= x_max and Omega(w_lo) > 0.
double descent_time(const OmegaSolver& solver, double w_lo, double w_hi);

/// Whether the integral of 1/Omega over [s, infinity) converges.
/// Positive iff every site's own inverse-speed integral converges, with a
/// numeric tail-exponent fit of Omega when the per-site tests cannot
/// decide; any site whose speed grows at most linearly forces divergence
/// because the minimizer can park all excess mass there.  Requires
/// s >= 2 * #sites, where every site speed is positive.
Verdict omega_integral_test(const std::vector<MeasureSpec>& sites, double s);

} // namespace coordsim
