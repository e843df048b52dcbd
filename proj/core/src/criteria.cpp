#include "coordsim/criteria.hpp"

#include <cmath>
#include <variant>

#include "coordsim/errors.hpp"
#include "coordsim/quadrature.hpp"
#include "coordsim/rates.hpp"
#include "fitting.hpp"
#include "special.hpp"

namespace coordsim {
namespace {

double normalization(const MeasureSpec& m, const char* who) {
    const double mass = m.total_mass();
    if (mass <= 0.0)
        throw ZeroMeasure(std::string(who) +
                          ": needs a measure with positive total mass");
    return mass;
}

} // namespace

const char* to_string(Outcome o) {
    switch (o) {
        case Outcome::Positive: return "positive";
        case Outcome::Negative: return "negative";
        case Outcome::Inconclusive: return "inconclusive";
    }
    return "inconclusive";
}

Verdict comes_down(const MeasureSpec& lambda, double margin) {
    if (lambda.has_atom_at_one())
        throw AtomAtOne("comes_down: measures with an atom at 1 are outside "
                        "the classification");
    Verdict v;
    if (lambda.is_zero()) {
        v.outcome = Outcome::Negative;
        v.shortcut = "zero-measure";
        return v;
    }
    if (lambda.atom_zero() > 0.0) {
        v.outcome = Outcome::Positive;
        v.shortcut = "kingman-atom";
        if (lambda.atoms().empty() &&
            std::holds_alternative<NoDensity>(lambda.density()))
            v.series_sum = 2.0 / lambda.atom_zero();
        return v;
    }
    const auto kernel = as_beta_kernel(lambda.density());
    if (kernel && kernel->coeff > 0.0) {
        // Near zero the density behaves like z^(a-1), so the loss rate
        // grows like b^(2-a); atoms in (0,1] only add a linear term and
        // cannot flip either direction.
        v.exponent = 2.0 - kernel->a;
        v.exponent_se = 0.0;
        v.shortcut = "kernel-exponent";
        v.outcome = kernel->a < 1.0 ? Outcome::Positive : Outcome::Negative;
        return v;
    }
    if (lambda.density_mass() == 0.0) {
        // Finitely many atoms bounded away from zero: the loss rate is
        // asymptotically linear in b and its inverse sum diverges.
        v.outcome = Outcome::Negative;
        v.shortcut = "finite-support";
        return v;
    }

    double running = 0.0;
    for (std::int64_t e = detail::kDyadicLo; e <= detail::kDyadicHi; ++e) {
        const std::int64_t b = std::int64_t{1} << e;
        const double g = gamma_b(lambda, b);
        v.points.emplace_back(static_cast<double>(b), g);
        running += 1.0 / g;
        v.partial_sums.push_back(running);
    }
    const std::size_t n = v.points.size();
    const detail::LogLogFit full = detail::fit_loglog(v.points, 0, n);
    const detail::LogLogFit lo = detail::fit_loglog(v.points, 0, n / 2 + 1);
    const detail::LogLogFit hi = detail::fit_loglog(v.points, n / 2, n);
    v.exponent = full.slope;
    v.exponent_se = full.slope_se;
    v.outcome = detail::classify_fit(full.slope, lo.slope, hi.slope, 1.0, margin,
                             Outcome::Positive, Outcome::Negative);
    return v;
}

double moment_1mW(const MeasureSpec& m, std::int64_t n) {
    if (n < 0) throw PreconditionViolated("moment_1mW: needs n >= 0");
    const double mass = normalization(m, "moment_1mW");
    const double nd = static_cast<double>(n);
    return (m.atom_zero() + survival_integral(m, n + 1, 1) / (nd + 1.0)) /
           mass;
}

double expected_neg_log(const MeasureSpec& m) {
    const double mass = normalization(m, "expected_neg_log");
    if (m.atom_zero() > 0.0)
        return std::numeric_limits<double>::infinity();
    double total = 0.0;
    for (const auto& a : m.atoms()) total += -a.mass * std::log(a.z);

    const Density& density = m.density();
    if (const auto* c = std::get_if<ConstantDensity>(&density)) {
        total += c->value;
    } else if (const auto* p = std::get_if<PowerLawDensity>(&density)) {
        total += p->scale / ((1.0 - p->gamma) * (1.0 - p->gamma));
    } else if (const auto* bd = std::get_if<BetaDensity>(&density)) {
        total += bd->scale * (detail::digamma(bd->a + bd->b) -
                              detail::digamma(bd->a));
    } else if (std::holds_alternative<TabulatedDensity>(density)) {
        std::vector<double> bp;
        for (const auto& g :
             std::get<TabulatedDensity>(density).grid)
            bp.push_back(g.z);
        auto integrand = [&](double z) {
            return -std::log(z) * m.density_at(z);
        };
        total += integrate_from_zero(integrand, 1.0, bp).value;
    }
    return total / mass;
}

Verdict kingman_strong_test(const MeasureSpec& m) {
    Verdict v;
    v.shortcut = "neg-log";
    v.series_sum = expected_neg_log(m);
    v.outcome = std::isinf(v.series_sum) ? Outcome::Positive
                                         : Outcome::Negative;
    return v;
}

Verdict series_strong_test(const MeasureSpec& m, double alpha, double margin) {
    if (!(alpha > 1.0 && alpha < 2.0))
        throw PreconditionViolated(
            "series_strong_test: needs alpha in (1,2)");
    normalization(m, "series_strong_test");
    Verdict v;
    if (m.atom_zero() > 0.0) {
        v.outcome = Outcome::Positive;
        v.shortcut = "atom-at-zero";
        return v;
    }

    const Density& density = m.density();
    // Atoms in (0,1] contribute a term decaying like 1/n, whose series
    // sum_n n^(-alpha) always converges; the verdict is governed by the
    // density alone.
    if (const auto* p = std::get_if<PowerLawDensity>(&density)) {
        if (p->scale > 0.0) {
            v.shortcut = "series-exponent";
            v.exponent = 1.0 - p->gamma;
            v.exponent_se = 0.0;
            v.outcome = alpha - p->gamma <= 1.0 ? Outcome::Positive
                                                : Outcome::Negative;
            return v;
        }
    } else if (const auto* c = std::get_if<ConstantDensity>(&density)) {
        if (c->value > 0.0) {
            v.shortcut = "series-exponent";
            v.exponent = 1.0;
            v.exponent_se = 0.0;
            v.outcome = Outcome::Negative;
            return v;
        }
    } else if (const auto* bd = std::get_if<BetaDensity>(&density)) {
        if (bd->scale > 0.0) {
            v.shortcut = "series-exponent";
            v.exponent = std::min(bd->a, 1.0);
            v.exponent_se = 0.0;
            v.outcome = bd->a <= 2.0 - alpha ? Outcome::Positive
                                             : Outcome::Negative;
            return v;
        }
    }
    if (m.density_mass() == 0.0) {
        v.outcome = Outcome::Negative;
        v.shortcut = "finite-support";
        v.exponent = 1.0;
        v.exponent_se = 0.0;
        return v;
    }

    double running = 0.0;
    for (std::int64_t e = detail::kDyadicLo; e <= detail::kDyadicHi; ++e) {
        const std::int64_t n = std::int64_t{1} << e;
        const double a_n = moment_1mW(m, n);
        v.points.emplace_back(static_cast<double>(n), a_n);
        running += a_n * std::pow(static_cast<double>(n), 1.0 - alpha);
        v.partial_sums.push_back(running);
    }
    const std::size_t n = v.points.size();
    const detail::LogLogFit full = detail::fit_loglog(v.points, 0, n);
    const detail::LogLogFit lo = detail::fit_loglog(v.points, 0, n / 2 + 1);
    const detail::LogLogFit hi = detail::fit_loglog(v.points, n / 2, n);
    v.exponent = -full.slope;
    v.exponent_se = full.slope_se;
    // Divergence iff sigma + alpha - 1 <= 1, so sigma above the threshold
    // means convergent (Negative).
    v.outcome = detail::classify_fit(-full.slope, -lo.slope, -hi.slope,
                             2.0 - alpha, margin, Outcome::Negative,
                             Outcome::Positive);
    return v;
}

StrengthQuery resolve_strength_test(const MeasureSpec& mu,
                                    const MeasureSpec& lambda) {
    StrengthQuery q;
    q.profile = lambda.regularity();
    if (mu.atom_zero() > 0.0)
        q.used = StrengthTest::AtomAtZero;
    else if (std::isinf(expected_neg_log(mu)))
        q.used = StrengthTest::NegLog;
    else if (q.profile.kind == RegularityProfile::Kind::Kingman)
        q.used = StrengthTest::NegLog;
    else if (q.profile.kind == RegularityProfile::Kind::Regular)
        q.used = StrengthTest::SeriesAlpha;
    else
        q.used = StrengthTest::Unknown;
    return q;
}

Verdict is_lambda_strong(const MeasureSpec& mu, const MeasureSpec& lambda,
                         double margin) {
    const Verdict cd = comes_down(lambda);
    if (cd.outcome != Outcome::Positive)
        throw StrengthUndefined(
            std::string("is_lambda_strong: the coalescence measure ") +
            (cd.outcome == Outcome::Negative
                 ? "does not come down from infinity"
                 : "is not established to come down from infinity"));
    normalization(mu, "is_lambda_strong");
    if (mu.atom_zero() > 0.0) {
        Verdict v;
        v.outcome = Outcome::Positive;
        v.shortcut = "atom-at-zero";
        return v;
    }
    const double nl = expected_neg_log(mu);
    if (std::isinf(nl)) {
        Verdict v;
        v.outcome = Outcome::Positive;
        v.shortcut = "neg-log";
        v.series_sum = nl;
        return v;
    }
    const RegularityProfile profile = lambda.regularity();
    if (profile.kind == RegularityProfile::Kind::Kingman)
        return kingman_strong_test(mu);
    if (profile.kind == RegularityProfile::Kind::Regular)
        return series_strong_test(mu, profile.alpha, margin);
    return Verdict{};
}

} // namespace coordsim
