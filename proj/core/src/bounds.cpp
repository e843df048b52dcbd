#include "coordsim/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <variant>

#include "coordsim/errors.hpp"
#include "coordsim/quadrature.hpp"
#include "coordsim/rates.hpp"
#include "fitting.hpp"

namespace coordsim {
namespace detail {
namespace {

// Hermite basis integrals over [0, t] for the cubic on a unit interval.
double p00(double t) { return ((0.5 * t - 1.0) * t * t + 1.0) * t; }
double p10(double t) { return ((0.25 * t - 2.0 / 3.0) * t + 0.5) * t * t; }
double p01(double t) { return (1.0 - 0.5 * t) * t * t * t; }
double p11(double t) { return (0.25 * t - 1.0 / 3.0) * t * t * t; }

} // namespace

// Clipped speed of one site: zero on [0, 1], the exact psi beyond.  The
// derivative is tabulated on a geometric grid and interpolated with a
// monotone (Fritsch-Carlson) cubic, so the integrated speed stays convex
// no matter the quadrature noise in the nodes.
class SiteSpeed {
public:
    SiteSpeed(const MeasureSpec& m, double x_hi) {
        if (m.is_zero()) {
            zero_ = true;
            return;
        }
        if (m.atoms().empty() &&
            std::holds_alternative<NoDensity>(m.density())) {
            analytic_ = true;
            c_ = m.atom_zero();
            return;
        }
        build(m, x_hi);
    }

    bool zero() const { return zero_; }

    double speed(double x) const {
        if (zero_ || x <= 1.0) return 0.0;
        if (analytic_) return 0.5 * c_ * x * (x - 1.0);
        const std::size_t j = interval(x);
        const double h = q_[j + 1] - q_[j];
        const double t = (x - q_[j]) / h;
        return cum_[j] + h * (d_[j] * p00(t) + h * m_[j] * p10(t) +
                              d_[j + 1] * p01(t) + h * m_[j + 1] * p11(t));
    }

    double dspeed(double x) const {
        if (zero_ || x < 1.0) return 0.0;
        if (analytic_) return c_ * (x - 0.5);
        if (x >= q_.back()) return d_.back();
        const std::size_t j = interval(x);
        return hermite(j, x);
    }

    // Largest point of [0, cap] where the speed derivative stays at or
    // below mu.  The first unit is free for every site, so the result
    // never falls below min(1, cap).
    double invert(double mu, double cap) const {
        if (zero_ || cap <= 1.0) return cap;
        if (mu < dspeed(1.0)) return 1.0;
        if (analytic_) return std::min(cap, mu / c_ + 0.5);
        if (mu >= dspeed(cap)) return cap;
        std::size_t j = interval_below(mu);
        double lo = q_[j], hi = std::min(q_[j + 1], cap);
        for (int it = 0; it < 60 && hi - lo > 1e-14 * hi; ++it) {
            const double mid = 0.5 * (lo + hi);
            (hermite(j, mid) <= mu ? lo : hi) = mid;
        }
        return std::min(0.5 * (lo + hi), cap);
    }

private:
    void build(const MeasureSpec& m, double x_hi) {
        for (double q = 1.0; q < x_hi; q *= 1.03) q_.push_back(q);
        q_.push_back(x_hi);
        d_.resize(q_.size());
        for (std::size_t j = 0; j < q_.size(); ++j) {
            const double h = 1e-4 * q_[j];
            d_[j] = (psi(m, q_[j] + h) - psi(m, q_[j] - h)) / (2.0 * h);
            if (j > 0) d_[j] = std::max(d_[j], d_[j - 1]);
        }
        const std::size_t K = q_.size() - 1;
        std::vector<double> sec(K);
        for (std::size_t j = 0; j < K; ++j)
            sec[j] = (d_[j + 1] - d_[j]) / (q_[j + 1] - q_[j]);
        m_.resize(q_.size());
        m_.front() = sec.front();
        m_.back() = sec.back();
        for (std::size_t j = 1; j < K; ++j) {
            if (sec[j - 1] <= 0.0 || sec[j] <= 0.0) {
                m_[j] = 0.0;
                continue;
            }
            const double h0 = q_[j] - q_[j - 1];
            const double h1 = q_[j + 1] - q_[j];
            m_[j] = 3.0 * (h0 + h1) / ((2.0 * h1 + h0) / sec[j - 1] +
                                       (h1 + 2.0 * h0) / sec[j]);
        }
        cum_.resize(q_.size());
        cum_[0] = 0.0;
        for (std::size_t j = 0; j < K; ++j) {
            const double h = q_[j + 1] - q_[j];
            cum_[j + 1] = cum_[j] + 0.5 * h * (d_[j] + d_[j + 1]) +
                          h * h / 12.0 * (m_[j] - m_[j + 1]);
        }
    }

    std::size_t interval(double x) const {
        const auto it = std::upper_bound(q_.begin(), q_.end(), x);
        const std::size_t j = static_cast<std::size_t>(it - q_.begin());
        if (j == 0) return 0;
        if (j >= q_.size()) {
            if (x > q_.back() * (1.0 + 1e-12))
                throw PreconditionViolated("site speed: beyond tabulated domain");
            return q_.size() - 2;
        }
        return j - 1;
    }

    std::size_t interval_below(double mu) const {
        const auto it = std::upper_bound(d_.begin(), d_.end(), mu);
        const std::size_t j = static_cast<std::size_t>(it - d_.begin());
        return j == 0 ? 0 : std::min(j - 1, q_.size() - 2);
    }

    double hermite(std::size_t j, double x) const {
        const double h = q_[j + 1] - q_[j];
        const double t = (x - q_[j]) / h;
        const double h00 = (2.0 * t - 3.0) * t * t + 1.0;
        const double h10 = ((t - 2.0) * t + 1.0) * t;
        const double h01 = (3.0 - 2.0 * t) * t * t;
        const double h11 = (t - 1.0) * t * t;
        return d_[j] * h00 + h * m_[j] * h10 + d_[j + 1] * h01 +
               h * m_[j + 1] * h11;
    }

    bool zero_ = false;
    bool analytic_ = false;
    double c_ = 0.0;
    std::vector<double> q_, d_, m_, cum_;
};

} // namespace detail

OmegaSolver::OmegaSolver(std::vector<MeasureSpec> sites, double x_max)
    : sites_(std::move(sites)), x_max_(std::max(x_max, 4.0)) {
    if (sites_.empty())
        throw PreconditionViolated("omega solver: needs at least one site");
    speeds_.reserve(sites_.size());
    for (const auto& m : sites_) speeds_.emplace_back(m, x_max_);
}

OmegaSolver::~OmegaSolver() = default;
OmegaSolver::OmegaSolver(OmegaSolver&&) noexcept = default;
OmegaSolver& OmegaSolver::operator=(OmegaSolver&&) noexcept = default;

double OmegaSolver::psi_sum(const std::vector<double>& xs) const {
    if (xs.size() != sites_.size())
        throw PreconditionViolated("psi_sum: needs one entry per site");
    double total = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (!(xs[i] >= 0.0))
            throw PreconditionViolated("psi_sum: needs nonnegative entries");
        total += psi(sites_[i], xs[i]);
    }
    return total;
}

double OmegaSolver::site_speed(std::size_t i, double q) const {
    if (i >= speeds_.size())
        throw PreconditionViolated("site_speed: site index out of range");
    return speeds_[i].speed(q);
}

OmegaResult OmegaSolver::omega(double x) const {
    if (!(x >= 0.0))
        throw PreconditionViolated("omega: needs x >= 0");
    if (x > x_max_ * (1.0 + 1e-12))
        throw PreconditionViolated("omega: x beyond solver domain");
    x = std::min(x, x_max_);

    const std::size_t N = speeds_.size();
    OmegaResult r;
    r.allocation.assign(N, 0.0);
    if (x == 0.0) return r;

    // Allocations inside [0, 1] cost nothing, so when the zero-speed zones
    // can absorb everything the marginal is zero; zero-measure sites take
    // the excess first since their zone has no upper edge.
    double flat = 0.0;
    for (const auto& s : speeds_) flat += s.zero() ? x : std::min(1.0, x);
    if (flat >= x) {
        double rest = x;
        for (std::size_t i = 0; i < N && rest > 0.0; ++i)
            if (speeds_[i].zero()) {
                r.allocation[i] = rest;
                rest = 0.0;
            }
        for (std::size_t i = 0; i < N && rest > 0.0; ++i)
            if (!speeds_[i].zero()) {
                r.allocation[i] = std::min(1.0, rest);
                rest -= r.allocation[i];
            }
        return r;
    }

    double mu_hi = 0.0;
    for (const auto& s : speeds_)
        mu_hi = std::max(mu_hi, s.dspeed(std::min(x, x_max_)));
    mu_hi = 2.0 * mu_hi + 1.0;

    const double tol = 1e-11 * std::max(x, 1.0);
    double lo = 0.0, hi = mu_hi, mu = 0.0, sum = 0.0;
    bool converged = false;
    for (int it = 0; it < 200; ++it) {
        mu = 0.5 * (lo + hi);
        sum = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            r.allocation[i] = speeds_[i].invert(mu, x);
            sum += r.allocation[i];
        }
        if (std::fabs(sum - x) <= tol || hi - lo <= 1e-15 * mu_hi) {
            converged = true;
            break;
        }
        (sum < x ? lo : hi) = mu;
    }
    if (!converged && std::fabs(sum - x) > 1e-9 * std::max(x, 1.0))
        throw ConvergenceFailure("omega: marginal bisection did not meet "
                                 "the allocation tolerance");

    std::size_t big = 0;
    for (std::size_t i = 1; i < N; ++i)
        if (r.allocation[i] > r.allocation[big]) big = i;
    r.allocation[big] += x - sum;

    r.marginal = mu;
    for (std::size_t i = 0; i < N; ++i) {
        r.value += speeds_[i].speed(r.allocation[i]);
        if (r.allocation[i] > 1.0 + 1e-9 && r.allocation[i] < x - 1e-9)
            r.kkt_residual = std::max(
                r.kkt_residual,
                std::fabs(speeds_[i].dspeed(r.allocation[i]) - mu));
    }
    return r;
}

OmegaResult omega(const std::vector<MeasureSpec>& sites, double x) {
    return OmegaSolver(sites, std::max(x, 4.0) * 1.001).omega(x);
}

WnCurve solve_wn(const std::vector<MeasureSpec>& sites, std::int64_t n,
                 double t_max, double dt) {
    if (sites.empty())
        throw PreconditionViolated("solve_wn: needs at least one site");
    if (n < 1) throw PreconditionViolated("solve_wn: needs n >= 1");
    if (!(t_max > 0.0) || !(dt > 0.0) || dt > t_max)
        throw PreconditionViolated("solve_wn: needs 0 < dt <= t_max");

    const double N = static_cast<double>(sites.size());
    const double w0 = static_cast<double>(n) * N;
    const OmegaSolver solver(sites, w0 * (1.0 + 1e-9) + 1.0);

    WnCurve curve;
    curve.dt = dt;
    curve.points.reserve(static_cast<std::size_t>(t_max / dt) + 2);

    double w = w0;
    const auto rate = [&](double q) {
        return solver.omega_value(std::clamp(q, 0.0, w0));
    };
    for (std::int64_t step = 0;; ++step) {
        const double t = std::min(static_cast<double>(step) * dt, t_max);
        const double k1 = rate(w);
        curve.points.push_back({t, w, k1});
        if (t >= t_max) break;
        const double h = std::min(dt, t_max - t);
        const double k2 = rate(w - 0.5 * h * k1);
        const double k3 = rate(w - 0.5 * h * k2);
        const double k4 = rate(w - h * k3);
        w -= h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (w < N) {
            w = N;
            curve.clipped = true;
        }
    }
    return curve;
}

double descent_time(const OmegaSolver& solver, double w_lo, double w_hi) {
    const double N = static_cast<double>(solver.size());
    if (!(w_lo > N) || !(w_hi >= w_lo) ||
        w_hi > solver.x_max() * (1.0 + 1e-12))
        throw PreconditionViolated(
            "descent_time: needs #sites < w_lo <= w_hi <= x_max");
    if (w_hi == w_lo) return 0.0;
    if (solver.omega_value(w_lo) <= 0.0)
        throw PreconditionViolated("descent_time: speed vanishes at w_lo");
    QuadratureOptions opt;
    opt.rel_tol = 1e-8;
    opt.abs_tol = 1e-12;
    return integrate([&](double q) { return 1.0 / solver.omega_value(q); },
                     w_lo, std::min(w_hi, solver.x_max()), opt)
        .value;
}

Verdict omega_integral_test(const std::vector<MeasureSpec>& sites, double s) {
    if (sites.empty())
        throw PreconditionViolated(
            "omega_integral_test: needs at least one site");
    const double N = static_cast<double>(sites.size());
    if (!(s >= 2.0 * N))
        throw PreconditionViolated(
            "omega_integral_test: needs s >= 2 * #sites");

    // Per-site route: the inverse-speed integral of one site converges
    // exactly when the site comes down from infinity, and one divergent
    // site sinks the whole minimum (park all excess mass there).
    bool all_positive = true;
    for (const auto& m : sites) {
        Verdict site;
        if (m.is_zero()) {
            site.outcome = Outcome::Negative;
            site.shortcut = "zero-measure";
        } else if (m.has_atom_at_one()) {
            // Mass at z = 1 with a finite 1/z moment caps the speed at a
            // linear function, whose inverse integral diverges.
            site.outcome = Outcome::Negative;
            site.shortcut = "linear-tail";
        } else {
            site = comes_down(m);
        }
        if (site.outcome == Outcome::Negative) {
            Verdict v;
            v.outcome = Outcome::Negative;
            v.shortcut = site.shortcut == "zero-measure" ? "zero-measure"
                                                         : "slowest-site";
            return v;
        }
        if (site.outcome != Outcome::Positive) all_positive = false;
    }
    if (all_positive) {
        Verdict v;
        v.outcome = Outcome::Positive;
        v.shortcut = "per-site";
        return v;
    }

    // Some site resisted classification: fit the tail exponent of the
    // minimum itself over dyadic arguments.
    Verdict v;
    const double hi_x =
        N * static_cast<double>(std::int64_t{1} << detail::kDyadicHi);
    const OmegaSolver solver(sites, hi_x * 1.01);
    double running = 0.0;
    double prev_x = 0.0, prev_f = 0.0;
    for (std::int64_t e = detail::kDyadicLo; e <= detail::kDyadicHi; ++e) {
        const double x =
            N * static_cast<double>(std::int64_t{1} << e);
        const double om = solver.omega_value(x);
        v.points.emplace_back(x, om);
        if (!v.partial_sums.empty())
            running += 0.5 * (1.0 / om + prev_f) * (x - prev_x);
        v.partial_sums.push_back(running);
        prev_x = x;
        prev_f = 1.0 / om;
    }
    const std::size_t np = v.points.size();
    const detail::LogLogFit full = detail::fit_loglog(v.points, 0, np);
    const detail::LogLogFit lo = detail::fit_loglog(v.points, 0, np / 2 + 1);
    const detail::LogLogFit hi = detail::fit_loglog(v.points, np / 2, np);
    v.exponent = full.slope;
    v.exponent_se = full.slope_se;
    v.outcome = detail::classify_fit(full.slope, lo.slope, hi.slope, 1.0, 0.05,
                                     Outcome::Positive, Outcome::Negative);
    return v;
}

} // namespace coordsim
