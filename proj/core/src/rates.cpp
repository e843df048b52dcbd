#include "coordsim/rates.hpp"

#include <cmath>
#include <string>

#include "coordsim/errors.hpp"
#include "coordsim/quadrature.hpp"
#include "special.hpp"

namespace coordsim {
namespace {

double atom_zero_total(ActionKind kind, double mass, std::int64_t b) {
    const double bd = static_cast<double>(b);
    return kind == ActionKind::Coalescence ? mass * 0.5 * bd * (bd - 1.0)
                                           : mass * bd;
}

std::vector<double> tabulated_breakpoints(const MeasureSpec& mu) {
    const auto* tab = std::get_if<TabulatedDensity>(&mu.density());
    if (!tab) return {};
    std::vector<double> bp;
    for (const auto& g : tab->grid) bp.push_back(g.z);
    return bp;
}

// C(b,k) * (contribution of atoms in (0,1] and the density to the
// blockwise rate), evaluated with the binomial folded into log space so
// nothing over- or underflows at large b.
double scaled_plus_block_rate(const MeasureSpec& mu, std::int64_t b,
                              std::int64_t k, int w) {
    const double bd = static_cast<double>(b);
    const double kd = static_cast<double>(k);
    const double lc = detail::lchoose(bd, kd);
    const double zp = kd - w;
    const double op = bd - kd;

    double result = 0.0;
    for (const auto& a : mu.atoms()) {
        if (op > 0.0 && a.z == 1.0) continue;
        double lg = lc + std::log(a.mass) + zp * std::log(a.z);
        if (op > 0.0) lg += op * std::log1p(-a.z);
        result += std::exp(lg);
    }

    const Density& density = mu.density();
    if (std::holds_alternative<NoDensity>(density)) return result;
    const auto kernel = as_beta_kernel(density);
    if (kernel && !std::holds_alternative<ConstantDensity>(density)) {
        result += kernel->coeff *
                  std::exp(lc + detail::lbeta(zp + kernel->a, op + kernel->b));
        return result;
    }
    auto integrand = [&](double z) {
        double lg = lc;
        if (zp > 0.0) lg += zp * std::log(z);
        if (op > 0.0) lg += op * std::log1p(-z);
        return std::exp(lg) * mu.density_at(z);
    };
    result += integrate_from_zero(integrand, 1.0, tabulated_breakpoints(mu))
                  .value;
    return result;
}

// sum_{k=2}^{b} (k-1) C(b,k) z^{k-2} (1-z)^{b-k}, anchored at the modal k
// so no individual term under- or overflows.
double binom_loss_sum(std::int64_t b, double z) {
    const double bd = static_cast<double>(b);
    if (z <= 0.0) return 0.5 * bd * (bd - 1.0);
    if (z >= 1.0) return bd - 1.0;
    std::int64_t k0 = std::llround(bd * z);
    k0 = std::max<std::int64_t>(2, std::min(k0, b));
    const double k0d = static_cast<double>(k0);
    const double t0 = std::exp(detail::lchoose(bd, k0d) +
                               (k0d - 2.0) * std::log(z) +
                               (bd - k0d) * std::log1p(-z));
    double sum = (k0d - 1.0) * t0;
    const double up = z / (1.0 - z);
    double t = t0;
    for (std::int64_t k = k0; k < b; ++k) {
        const double kd = static_cast<double>(k);
        t *= (bd - kd) / (kd + 1.0) * up;
        sum += kd * t;
        if (t * bd < sum * 1e-18) break;
    }
    t = t0;
    for (std::int64_t k = k0; k > 2; --k) {
        const double kd = static_cast<double>(k);
        t *= kd / (bd - kd + 1.0) / up;
        sum += (kd - 2.0) * t;
        if (t * bd < sum * 1e-18) break;
    }
    return sum;
}

} // namespace

double block_rate(ActionKind kind, const MeasureSpec& mu, std::int64_t b,
                  std::int64_t k) {
    const int w = weight_of(kind);
    if (k < w || k > b)
        throw PreconditionViolated("block_rate: needs " + std::to_string(w) +
                                   " <= k <= b");
    return weighted_moment(mu, k, b, w);
}

double total_rate(ActionKind kind, const MeasureSpec& mu, std::int64_t b) {
    if (b < 0) throw PreconditionViolated("total_rate: needs b >= 0");
    const int w = weight_of(kind);
    if (b < w) return 0.0;
    return atom_zero_total(kind, mu.atom_zero(), b) +
           survival_integral(mu, b, w);
}

double gamma_b(const MeasureSpec& lambda, std::int64_t b) {
    if (b < 2) throw PreconditionViolated("gamma_b: needs b >= 2");
    const double bd = static_cast<double>(b);
    double result = lambda.atom_zero() * 0.5 * bd * (bd - 1.0);
    for (const auto& a : lambda.atoms())
        result += a.mass * detail::loss_tilt(bd, a.z) / (a.z * a.z);

    const Density& density = lambda.density();
    if (std::holds_alternative<NoDensity>(density)) return result;

    if (b <= 256) {
        // k-sum route, kept distinct from the psi quadrature so the
        // gamma/psi identity is a genuine cross-check in this range.
        const auto kernel = as_beta_kernel(density);
        if (kernel && !std::holds_alternative<ConstantDensity>(density)) {
            double term =
                std::exp(detail::lchoose(bd, 2.0) +
                         detail::lbeta(kernel->a, bd - 2.0 + kernel->b)) *
                kernel->coeff;
            double sum = 0.0;
            for (std::int64_t k = 2; k < b; ++k) {
                const double kd = static_cast<double>(k);
                sum += (kd - 1.0) * term;
                term *= (bd - kd) / (kd + 1.0) * (kd - 2.0 + kernel->a) /
                        (bd - kd - 1.0 + kernel->b);
            }
            return result + sum + (bd - 1.0) * term;
        }
        // Constant/Tabulated: evaluate the k-sum inside a single quadrature.
        // Summing per-k quadratures instead would amplify the absolute
        // integration floor by binomial factors up to ~1e43.
        auto integrand = [&](double z) {
            return binom_loss_sum(b, z) * lambda.density_at(z);
        };
        result += integrate_from_zero(integrand, 1.0,
                                      tabulated_breakpoints(lambda))
                      .value;
        return result;
    }

    // Above the cross-check range the k-sum is summed in closed form,
    // which coincides with the psi integrand.
    auto integrand = [&](double z) {
        return detail::loss_tilt_over_zsq(bd, z) * lambda.density_at(z);
    };
    result += integrate_from_zero(integrand, 1.0,
                                  tabulated_breakpoints(lambda))
                  .value;
    return result;
}

double psi(const MeasureSpec& lambda, double q) {
    if (!(q >= 0.0)) throw PreconditionViolated("psi: needs q >= 0");
    double result = lambda.atom_zero() * 0.5 * q * (q - 1.0);
    for (const auto& a : lambda.atoms())
        result += a.mass * detail::loss_tilt(q, a.z) / (a.z * a.z);
    if (std::holds_alternative<NoDensity>(lambda.density())) return result;
    if (q == 0.0 || q == 1.0) return result;
    auto integrand = [&](double z) {
        return detail::loss_tilt_over_zsq(q, z) * lambda.density_at(z);
    };
    result += integrate_from_zero(integrand, 1.0,
                                  tabulated_breakpoints(lambda))
                  .value;
    return result;
}

double zeta(const MeasureSpec& lambda, const MeasureSpec& death,
            std::int64_t n, std::int64_t k) {
    if (n < 2) throw PreconditionViolated("zeta: needs n >= 2");
    if (k < 1 || k > n) throw PreconditionViolated("zeta: needs 1 <= k <= n");
    const double rate_sum = total_rate(ActionKind::Coalescence, lambda, n) +
                            total_rate(ActionKind::Death, death, n);
    if (rate_sum == 0.0)
        throw DegenerateChain(
            "zeta: no coalescence or death events at this count");
    const double bd = static_cast<double>(n);
    double numerator = 0.0;
    if (k < n) {
        if (k == 1) numerator += lambda.atom_zero() * 0.5 * bd * (bd - 1.0);
        numerator += scaled_plus_block_rate(lambda, n, k + 1, 2);
    }
    numerator += death.atom_zero() * (k == 1 ? bd : 0.0);
    numerator += scaled_plus_block_rate(death, n, k, 1);
    return numerator / rate_sum;
}

LossDistribution loss_distribution(const MeasureSpec& lambda,
                                   const MeasureSpec& death, std::int64_t n) {
    if (n < 2)
        throw PreconditionViolated("loss_distribution: needs n >= 2");
    const double rate_sum = total_rate(ActionKind::Coalescence, lambda, n) +
                            total_rate(ActionKind::Death, death, n);
    if (rate_sum == 0.0)
        throw DegenerateChain(
            "loss_distribution: no coalescence or death events at this "
            "count");
    LossDistribution out;
    out.n = n;
    out.zeta.assign(static_cast<std::size_t>(n), 0.0);
    const double bd = static_cast<double>(n);
    out.zeta[0] = lambda.atom_zero() * 0.5 * bd * (bd - 1.0) +
                  death.atom_zero() * bd;
    for (std::int64_t k = 1; k <= n; ++k) {
        double num = out.zeta[static_cast<std::size_t>(k - 1)];
        if (k < n) num += scaled_plus_block_rate(lambda, n, k + 1, 2);
        num += scaled_plus_block_rate(death, n, k, 1);
        out.zeta[static_cast<std::size_t>(k - 1)] = num / rate_sum;
    }
    double sum = 0.0;
    for (double p : out.zeta) sum += p;
    out.deficit = 1.0 - sum;
    return out;
}

double zeta_limit(double alpha, std::int64_t k) {
    if (!(alpha > 1.0 && alpha < 2.0))
        throw PreconditionViolated("zeta_limit: needs alpha in (1, 2)");
    if (k < 1) throw PreconditionViolated("zeta_limit: needs k >= 1");
    const double kd = static_cast<double>(k);
    return std::exp(std::log(alpha) + std::lgamma(kd + 1.0 - alpha) -
                    std::lgamma(kd + 2.0) - std::lgamma(2.0 - alpha));
}

double migration_event_rate(const MeasureSpec& m, std::int64_t n) {
    if (n < 1)
        throw PreconditionViolated("migration_event_rate: needs n >= 1");
    return m.atom_zero() * static_cast<double>(n) +
           survival_integral(m, n, 1);
}

RateCache::RateCache(MeasureSpec measure, ActionKind kind, std::int64_t max_n)
    : measure_(std::move(measure)), kind_(kind), max_n_(max_n) {
    if (max_n_ < 0)
        throw PreconditionViolated("RateCache: needs max_n >= 0");
}

RateCache::~RateCache() {
    delete total_.page.load(std::memory_order_acquire);
    delete gamma_.page.load(std::memory_order_acquire);
    delete psi_.page.load(std::memory_order_acquire);
}

template <typename Compute>
double RateCache::lookup(Slot& slot, std::int64_t n, Compute&& compute) const {
    if (n > max_n_) return compute();
    const auto idx = static_cast<std::size_t>(n);
    Page* page = slot.page.load(std::memory_order_acquire);
    if (page && page->ready[idx].load(std::memory_order_acquire))
        return page->value[idx];
    std::lock_guard<std::mutex> lock(fill_mutex_);
    page = slot.page.load(std::memory_order_relaxed);
    if (!page) {
        auto fresh = std::make_unique<Page>();
        fresh->value.assign(static_cast<std::size_t>(max_n_) + 1, 0.0);
        fresh->ready = std::make_unique<std::atomic<std::uint8_t>[]>(
            static_cast<std::size_t>(max_n_) + 1);
        page = fresh.release();
        slot.page.store(page, std::memory_order_release);
    }
    if (page->ready[idx].load(std::memory_order_acquire))
        return page->value[idx];
    const double value = compute();
    page->value[idx] = value;
    page->ready[idx].store(1, std::memory_order_release);
    return value;
}

double RateCache::total(std::int64_t n) const {
    return lookup(total_, n, [&] { return total_rate(kind_, measure_, n); });
}

double RateCache::gamma(std::int64_t n) const {
    return lookup(gamma_, n, [&] { return gamma_b(measure_, n); });
}

double RateCache::psi_at(std::int64_t n) const {
    return lookup(psi_, n,
                  [&] { return psi(measure_, static_cast<double>(n)); });
}

} // namespace coordsim
