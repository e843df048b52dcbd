#include "coordsim/measure.hpp"

#include <cmath>
#include <string>

#include "coordsim/quadrature.hpp"
#include "special.hpp"

namespace coordsim {
namespace {

bool finite_nonneg(double x) { return std::isfinite(x) && x >= 0.0; }

void validate_density(const Density& density) {
    if (std::holds_alternative<NoDensity>(density)) return;
    if (const auto* c = std::get_if<ConstantDensity>(&density)) {
        if (!finite_nonneg(c->value))
            throw ValidationError("constant density needs a finite value >= 0");
        return;
    }
    if (const auto* p = std::get_if<PowerLawDensity>(&density)) {
        if (!(std::isfinite(p->scale) && p->scale > 0.0))
            throw ValidationError("power-law density needs scale > 0");
        if (!(p->gamma >= 0.0 && p->gamma < 1.0))
            throw ValidationError(
                "power-law exponent must lie in [0, 1): total mass is "
                "infinite otherwise");
        return;
    }
    if (const auto* b = std::get_if<BetaDensity>(&density)) {
        if (!(std::isfinite(b->a) && b->a > 0.0) ||
            !(std::isfinite(b->b) && b->b > 0.0))
            throw ValidationError("beta density needs shape parameters > 0");
        if (!(std::isfinite(b->scale) && b->scale > 0.0))
            throw ValidationError("beta density needs scale > 0");
        return;
    }
    const auto& grid = std::get<TabulatedDensity>(density).grid;
    if (grid.size() < 2)
        throw ValidationError("tabulated density needs at least two points");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!(grid[i].z >= 0.0 && grid[i].z <= 1.0))
            throw ValidationError("tabulated grid positions must lie in [0, 1]");
        if (!finite_nonneg(grid[i].f))
            throw ValidationError("tabulated values must be finite and >= 0");
        if (i > 0 && !(grid[i - 1].z < grid[i].z))
            throw ValidationError("tabulated grid must be strictly increasing");
    }
}

double density_total_mass(const Density& density) {
    if (std::holds_alternative<NoDensity>(density)) return 0.0;
    if (const auto* c = std::get_if<ConstantDensity>(&density))
        return c->value;
    if (const auto* p = std::get_if<PowerLawDensity>(&density))
        return p->scale / (1.0 - p->gamma);
    if (const auto* b = std::get_if<BetaDensity>(&density)) return b->scale;
    const auto& grid = std::get<TabulatedDensity>(density).grid;
    double mass = grid.front().f * grid.front().z +
                  grid.back().f * (1.0 - grid.back().z);
    for (std::size_t i = 1; i < grid.size(); ++i)
        mass += 0.5 * (grid[i].f + grid[i - 1].f) * (grid[i].z - grid[i - 1].z);
    return mass;
}

std::vector<double> density_breakpoints(const Density& density) {
    const auto* t = std::get_if<TabulatedDensity>(&density);
    if (!t) return {};
    std::vector<double> bp;
    bp.reserve(t->grid.size());
    for (const auto& g : t->grid) bp.push_back(g.z);
    return bp;
}

} // namespace

std::optional<BetaKernel> as_beta_kernel(const Density& density) {
    if (const auto* c = std::get_if<ConstantDensity>(&density)) {
        if (c->value == 0.0) return std::nullopt;
        return BetaKernel{c->value, 1.0, 1.0};
    }
    if (const auto* p = std::get_if<PowerLawDensity>(&density))
        return BetaKernel{p->scale, 1.0 - p->gamma, 1.0};
    if (const auto* b = std::get_if<BetaDensity>(&density))
        return BetaKernel{b->scale / std::exp(detail::lbeta(b->a, b->b)), b->a,
                          b->b};
    return std::nullopt;
}

MeasureSpec::MeasureSpec(double atom_zero, std::vector<Atom> atoms,
                         Density density, ActionKind label)
    : atom_zero_(atom_zero),
      atoms_(std::move(atoms)),
      density_(std::move(density)),
      label_(label) {
    if (!finite_nonneg(atom_zero_))
        throw ValidationError("atom at zero needs finite mass >= 0");
    for (const auto& a : atoms_) {
        if (!(a.z > 0.0 && a.z <= 1.0))
            throw ValidationError("atom positions must lie in (0, 1]");
        if (!(std::isfinite(a.mass) && a.mass > 0.0))
            throw ValidationError("atom masses must be finite and > 0");
    }
    validate_density(density_);
    density_mass_ = density_total_mass(density_);
    double atom_sum = 0.0;
    for (const auto& a : atoms_) atom_sum += a.mass;
    total_mass_ = atom_zero_ + atom_sum + density_mass_;
}

bool MeasureSpec::has_atom_at_one() const {
    for (const auto& a : atoms_)
        if (a.z == 1.0) return true;
    return false;
}

double MeasureSpec::density_at(double z) const {
    if (std::holds_alternative<NoDensity>(density_)) return 0.0;
    if (const auto* c = std::get_if<ConstantDensity>(&density_))
        return c->value;
    if (const auto* p = std::get_if<PowerLawDensity>(&density_))
        return p->scale * std::pow(z, -p->gamma);
    if (const auto* b = std::get_if<BetaDensity>(&density_)) {
        double lg = -detail::lbeta(b->a, b->b);
        if (b->a != 1.0) lg += (b->a - 1.0) * std::log(z);
        if (b->b != 1.0) lg += (b->b - 1.0) * std::log1p(-z);
        return b->scale * std::exp(lg);
    }
    const auto& grid = std::get<TabulatedDensity>(density_).grid;
    if (z <= grid.front().z) return grid.front().f;
    if (z >= grid.back().z) return grid.back().f;
    std::size_t hi = 1;
    while (grid[hi].z < z) ++hi;
    const auto& l = grid[hi - 1];
    const auto& r = grid[hi];
    return l.f + (r.f - l.f) * (z - l.z) / (r.z - l.z);
}

RegularityProfile MeasureSpec::regularity() const {
    const bool pure_density = atom_zero_ == 0.0 && atoms_.empty();
    if (density_mass_ == 0.0 && atoms_.empty() && atom_zero_ > 0.0)
        return {RegularityProfile::Kind::Kingman, 0.0, 0.0};
    if (pure_density) {
        if (const auto* p = std::get_if<PowerLawDensity>(&density_)) {
            if (p->gamma > 0.0)
                return {RegularityProfile::Kind::Regular, p->scale,
                        1.0 + p->gamma};
        }
        if (const auto* b = std::get_if<BetaDensity>(&density_)) {
            if (b->a < 1.0)
                return {RegularityProfile::Kind::Regular,
                        b->scale / std::exp(detail::lbeta(b->a, b->b)),
                        2.0 - b->a};
        }
    }
    return {RegularityProfile::Kind::Unknown, 0.0, 0.0};
}

double weighted_moment(const MeasureSpec& mu, std::int64_t k, std::int64_t b,
                       int w) {
    if (w != 1 && w != 2)
        throw PreconditionViolated("weighted_moment: weight must be 1 or 2");
    if (k < w)
        throw PreconditionViolated(
            "weighted_moment: needs k >= " + std::to_string(w) +
            " for weight " + std::to_string(w));
    if (b < k)
        throw PreconditionViolated("weighted_moment: needs b >= k");

    double result = (k == w) ? mu.atom_zero() : 0.0;
    const double zp = static_cast<double>(k - w);
    const double op = static_cast<double>(b - k);
    for (const auto& a : mu.atoms())
        result += a.mass * std::pow(a.z, zp) * std::pow(1.0 - a.z, op);

    const Density& density = mu.density();
    if (std::holds_alternative<NoDensity>(density)) return result;
    if (const auto* p = std::get_if<PowerLawDensity>(&density)) {
        result += p->scale * std::exp(detail::lbeta(zp + 1.0 - p->gamma,
                                                    op + 1.0));
    } else if (const auto* bd = std::get_if<BetaDensity>(&density)) {
        result += bd->scale * std::exp(detail::lbeta(zp + bd->a, op + bd->b) -
                                       detail::lbeta(bd->a, bd->b));
    } else {
        auto integrand = [&](double z) {
            return std::pow(z, zp) * std::pow(1.0 - z, op) *
                   mu.density_at(z);
        };
        result += integrate_from_zero(integrand, 1.0,
                                      density_breakpoints(density))
                      .value;
    }
    return result;
}

double survival_integral(const MeasureSpec& mu, std::int64_t n, int w) {
    if (w != 1 && w != 2)
        throw PreconditionViolated("survival_integral: weight must be 1 or 2");
    if (n < 1)
        throw PreconditionViolated("survival_integral: needs n >= 1");
    if (w == 2 && n == 1) return 0.0;

    const double nd = static_cast<double>(n);
    double result = 0.0;
    for (const auto& a : mu.atoms())
        result += a.mass * (w == 1 ? detail::tilt_one_over_z(nd, a.z)
                                   : detail::tilt_two_over_zsq(nd, a.z));

    const Density& density = mu.density();
    if (std::holds_alternative<NoDensity>(density)) return result;
    if (const auto* c = std::get_if<ConstantDensity>(&density);
        c && c->value == 0.0)
        return result;

    const auto kernel = as_beta_kernel(density);
    const bool closed_form =
        kernel && !std::holds_alternative<ConstantDensity>(density);
    if (closed_form) {
        // Binomial expansion: sum over k >= w of
        //   C(n,k) * coeff * B(k - w + a, n - k + b),
        // walked by the positive term ratio so nothing overflows.
        double term = std::exp(detail::lchoose(nd, w) +
                               detail::lbeta(kernel->a, nd - w + kernel->b)) *
                      kernel->coeff;
        double sum = 0.0;
        for (std::int64_t k = w; k < n; ++k) {
            sum += term;
            const double kd = static_cast<double>(k);
            term *= (nd - kd) / (kd + 1.0) * (kd - w + kernel->a) /
                    (nd - kd - 1.0 + kernel->b);
        }
        return result + sum + term;
    }

    auto integrand = [&](double z) {
        const double tilt = (w == 1) ? detail::tilt_one_over_z(nd, z)
                                     : detail::tilt_two_over_zsq(nd, z);
        return tilt * mu.density_at(z);
    };
    result += integrate_from_zero(integrand, 1.0,
                                  density_breakpoints(density))
                  .value;
    return result;
}

} // namespace coordsim
