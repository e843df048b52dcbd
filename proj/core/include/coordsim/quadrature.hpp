#pragma once

#include <functional>
#include <vector>

namespace coordsim {

struct QuadratureResult {
    double value = 0.0;
    double error_estimate = 0.0;
    long evaluations = 0;
};

struct QuadratureOptions {
    double rel_tol = 1e-10;
    double abs_tol = 1e-14;
    int max_intervals = 4000;
};

/**
 * Adaptive Gauss-Kronrod (G7,K15) integration of f over [a, b].
 *
 * Intervals are bisected until the local Kronrod error estimate meets the
 * tolerance; throws QuadratureFailure when the interval budget runs out
 * before convergence.
 */
QuadratureResult integrate(const std::function<double(double)>& f, double a,
                           double b, const QuadratureOptions& opt = {});

/**
 * Integrates f over [0, b] for integrands that are steep or mildly singular
 * at the origin.  On [0, min(b, 0.1)] the substitution z = u^2 is applied
 * before the adaptive pass, which regularizes integrable endpoint behavior
 * without family-specific code; the remainder of [0, b] is integrated
 * directly with extra initial splits toward the origin.
 */
QuadratureResult integrate_from_zero(const std::function<double(double)>& f,
                                     double b,
                                     const QuadratureOptions& opt = {});

/**
 * Same as above with known interior breakpoints (kinks of piecewise
 * integrands); each breakpoint becomes an initial panel boundary so the
 * adaptive pass does not have to discover it.
 */
QuadratureResult integrate_from_zero(const std::function<double(double)>& f,
                                     double b,
                                     const std::vector<double>& breakpoints,
                                     const QuadratureOptions& opt = {});

} // namespace coordsim
