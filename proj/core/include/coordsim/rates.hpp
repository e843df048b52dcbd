#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <vector>

#include "coordsim/measure.hpp"

namespace coordsim {

/// Weight of the singular kernel for an action: coordinated coalescence
/// consumes pairs (w = 2), the other actions single particles (w = 1).
inline int weight_of(ActionKind kind) {
    return kind == ActionKind::Coalescence ? 2 : 1;
}

/// Rate at which a fixed set of k out of b particles is hit by one action.
/// Requires 2 <= k <= b for coalescence, 1 <= k <= b otherwise.
double block_rate(ActionKind kind, const MeasureSpec& mu, std::int64_t b,
                  std::int64_t k);

/// Total event rate at count b: the atom at zero contributes b(b-1)/2
/// (coalescence) or b (others) times its mass, the rest enters through the
/// survival integral.  Returns 0 below the action's minimal count.
double total_rate(ActionKind kind, const MeasureSpec& mu, std::int64_t b);

/// Total rate of decrease of the block count at b:
/// sum over k of (k-1) C(b,k) lambda_{b,k}.  Requires b >= 2.  Agrees with
/// psi(lambda, b) within 1e-8 relative (cross-checked identity).
double gamma_b(const MeasureSpec& lambda, std::int64_t b);

/// Processing speed at real argument q >= 0:
///   psi(q) = lambda({0}) q(q-1)/2
///          + integral of (qz - 1 + (1-z)^q) z^{-2} lambda+(dz).
/// Negative values on q in (0, 1) are legitimate and documented; the
/// density part always goes through quadrature so gamma_b keeps an
/// independent route.
double psi(const MeasureSpec& lambda, double q);

/// One-step loss probabilities of the embedded jump chain at count n.
struct LossDistribution {
    std::int64_t n = 0;
    /// zeta[k-1] = P(lose exactly k particles), k = 1..n.
    std::vector<double> zeta;
    /// 1 - sum of zeta; zero up to rounding for pure coalescence + death.
    double deficit = 0.0;
};

/// P(exactly k particles lost at the next jump) for a site with
/// coalescence measure lambda and death measure death:
///   zeta_{n,k} = (C(n,k+1) lambda_{n,k+1} + C(n,k) d_{n,k}) / (lambda_n + d_n)
/// with the coalescence term absent at k = n.  Requires n >= 2,
/// 1 <= k <= n; throws DegenerateChain when both total rates vanish.
double zeta(const MeasureSpec& lambda, const MeasureSpec& death,
            std::int64_t n, std::int64_t k);

/// All of zeta_{n,1..n} in one pass (shared normalization).
LossDistribution loss_distribution(const MeasureSpec& lambda,
                                   const MeasureSpec& death, std::int64_t n);

/// n -> infinity limit of zeta_{n,k} for a regular coalescent with index
/// alpha in (1, 2):  zeta_k = alpha Gamma(k+1-alpha) / ((k+1)! Gamma(2-alpha)).
double zeta_limit(double alpha, std::int64_t k);

/// Rate of migration events affecting at least one of n particles:
/// M({0}) n + survival_integral(M, n, 1).  Identical to
/// n ||M|| E[(1-W)^{n-1}] (tested identity).  Requires n >= 1.
double migration_event_rate(const MeasureSpec& m, std::int64_t n);

/// Memo of integer-argument rate quantities for one measure.  Lazily
/// populated behind a mutex; reads of populated slots are lock-free.
/// Cached values equal fresh recomputation bit for bit.  Counts above
/// max_n are computed fresh on every call (memory stays bounded).
class RateCache {
public:
    explicit RateCache(MeasureSpec measure, ActionKind kind,
                       std::int64_t max_n = 100000);
    ~RateCache();
    RateCache(const RateCache&) = delete;
    RateCache& operator=(const RateCache&) = delete;

    double total(std::int64_t n) const;
    /// gamma_b; only meaningful for coalescence measures.  Requires n >= 2.
    double gamma(std::int64_t n) const;
    /// psi at integer argument.  Requires n >= 0.
    double psi_at(std::int64_t n) const;

    const MeasureSpec& measure() const { return measure_; }
    ActionKind kind() const { return kind_; }
    std::int64_t max_n() const { return max_n_; }

private:
    /// One quantity's slot array, allocated as a unit on first use so a
    /// lock-free reader can never observe a half-built page.
    struct Page {
        std::vector<double> value;
        std::unique_ptr<std::atomic<std::uint8_t>[]> ready;
    };
    struct Slot {
        std::atomic<Page*> page{nullptr};
    };

    template <typename Compute>
    double lookup(Slot& slot, std::int64_t n, Compute&& compute) const;

    MeasureSpec measure_;
    ActionKind kind_;
    std::int64_t max_n_;
    mutable std::mutex fill_mutex_;
    mutable Slot total_, gamma_, psi_;
};

} // namespace coordsim
