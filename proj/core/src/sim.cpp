#include "coordsim/sim.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <variant>

#include "special.hpp"

namespace coordsim {

namespace {

constexpr int kSamplerCap = 200000;
constexpr double kEnvelopeSafety = 1.0 + 1e-9;

/// P(Binomial(n, z) >= w) as the z-dependent weight of a coordinated event.
double tilt(std::int64_t n, int w, double z) {
    if (z >= 1.0) return 1.0;
    const double nd = static_cast<double>(n);
    const double lq = std::log1p(-z);
    if (w == 1) return -std::expm1(nd * lq);
    return -std::expm1(nd * lq) - nd * z * std::exp((nd - 1.0) * lq);
}

double pow_int(double x, int w) { return w == 2 ? x * x : x; }

} // namespace

namespace detail {

/// Piecewise envelope for the tilted participation density
///   g(z) = tilt_n(z) z^{-w} f(z)
/// built once per (channel, count bucket) and valid for every n up to the
/// bucket because the tilt grows with n.  Each region carries a closed-form
/// dominating density; sampling is global rejection across regions.
struct TiltedGrid {
    enum class Kind { Panel, PowerLeft, BetaRight };

    struct Region {
        Kind kind;
        double lo;
        double hi;
        double amp; // Panel: constant height; others: kernel amplitude
        double p;   // kernel exponent, env = amp z^{p-1} or amp (1-z)^{p-1}
        double mass;
    };

    const MeasureSpec* mu = nullptr;
    int w = 1;
    std::int64_t bucket = 1;
    std::vector<Region> regions;
    std::vector<double> cum;

    double envelope_at(const Region& r, double z) const {
        switch (r.kind) {
            case Kind::Panel: return r.amp;
            case Kind::PowerLeft: return r.amp * std::pow(z, r.p - 1.0);
            case Kind::BetaRight: return r.amp * std::pow(1.0 - z, r.p - 1.0);
        }
        return 0.0;
    }

    double propose(const Region& r, CounterRng& rng) const {
        const double u = rng.next_double_pos();
        switch (r.kind) {
            case Kind::Panel: return r.lo + u * (r.hi - r.lo);
            case Kind::PowerLeft: return r.hi * std::pow(u, 1.0 / r.p);
            case Kind::BetaRight:
                return 1.0 - (1.0 - r.lo) * std::pow(u, 1.0 / r.p);
        }
        return 0.0;
    }

    double sample(std::int64_t n, CounterRng& rng) const {
        const double total = cum.empty() ? 0.0 : cum.back();
        if (total <= 0.0)
            throw SamplerFailure("tilted sampler: empty envelope");
        for (int iter = 0; iter < kSamplerCap; ++iter) {
            const double u = rng.next_double() * total;
            const std::size_t i =
                std::lower_bound(cum.begin(), cum.end(), u) - cum.begin();
            const Region& r = regions[std::min(i, regions.size() - 1)];
            const double z = propose(r, rng);
            if (z <= 0.0 || z > 1.0) continue;
            const double f = mu->density_at(z);
            if (f <= 0.0) continue;
            const double g = tilt(n, w, z) / pow_int(z, w) * f;
            if (rng.next_double() * envelope_at(r, z) < g) return z;
        }
        throw SamplerFailure("tilted sampler: rejection cap exceeded");
    }
};

namespace {

/// Exact supremum of the density over [lo, hi] (piecewise-monotone families).
double density_sup(const MeasureSpec& mu, double lo, double hi) {
    const Density& d = mu.density();
    if (std::holds_alternative<NoDensity>(d)) return 0.0;
    if (const auto* c = std::get_if<ConstantDensity>(&d)) return c->value;
    if (const auto* p = std::get_if<PowerLawDensity>(&d))
        return p->scale * std::pow(lo, -p->gamma);
    if (const auto* b = std::get_if<BetaDensity>(&d)) {
        double best = std::max(mu.density_at(lo), mu.density_at(hi));
        if (b->a > 1.0 && b->b > 1.0) {
            const double mode = (b->a - 1.0) / (b->a + b->b - 2.0);
            if (mode > lo && mode < hi)
                best = std::max(best, mu.density_at(mode));
        }
        return best;
    }
    const auto& grid = std::get<TabulatedDensity>(d).grid;
    double best = std::max(mu.density_at(lo), mu.density_at(hi));
    for (const auto& gp : grid)
        if (gp.z > lo && gp.z < hi) best = std::max(best, gp.f);
    return best;
}

} // namespace

std::unique_ptr<TiltedGrid> build_tilted_grid(const MeasureSpec& mu, int w,
                                              std::int64_t bucket) {
    auto grid = std::make_unique<TiltedGrid>();
    grid->mu = &mu;
    grid->w = w;
    grid->bucket = bucket;
    if (mu.density_mass() <= 0.0) return grid;

    const double bd = static_cast<double>(bucket);
    // tilt_n(z) <= A z^w for every n <= bucket.
    const double A = (w == 2) ? 0.5 * bd * (bd - 1.0) : bd;
    const double z0 = std::min(0.25, 0.5 / bd);

    std::vector<TiltedGrid::Region> regions;

    // Left region (0, z0]: dominate f by a pure power kernel.
    {
        double amp = 0.0, p = 1.0;
        const Density& d = mu.density();
        if (const auto* pl = std::get_if<PowerLawDensity>(&d)) {
            amp = A * pl->scale;
            p = 1.0 - pl->gamma;
        } else if (const auto* bt = std::get_if<BetaDensity>(&d)) {
            const auto kernel = as_beta_kernel(d);
            const double beta_max =
                bt->b >= 1.0 ? 1.0 : std::pow(1.0 - z0, bt->b - 1.0);
            amp = A * kernel->coeff * beta_max;
            p = bt->a;
        } else {
            amp = A * density_sup(mu, std::min(z0 * 1e-6, 1e-12), z0);
        }
        amp *= kEnvelopeSafety;
        if (amp > 0.0)
            regions.push_back({TiltedGrid::Kind::PowerLeft, 0.0, z0, amp, p,
                               amp * std::pow(z0, p) / p});
    }

    // Right region: only a Beta profile with b < 1 has a pole at 1.
    double panel_end = 1.0;
    if (const auto* bt = std::get_if<BetaDensity>(&mu.density());
        bt && bt->b < 1.0) {
        panel_end = 0.9375;
        const auto kernel = as_beta_kernel(mu.density());
        const double alpha_max =
            bt->a >= 1.0 ? 1.0 : std::pow(panel_end, bt->a - 1.0);
        const double amp = kEnvelopeSafety * kernel->coeff * alpha_max /
                           pow_int(panel_end, w);
        regions.push_back({TiltedGrid::Kind::BetaRight, panel_end, 1.0, amp,
                           bt->b,
                           amp * std::pow(1.0 - panel_end, bt->b) / bt->b});
    }

    // Geometric panels from z0 to panel_end, ratio sqrt(2).
    const double ratio = std::sqrt(2.0);
    double lo = z0;
    while (lo < panel_end) {
        const double hi = std::min(lo * ratio, panel_end);
        const double height = kEnvelopeSafety * tilt(bucket, w, hi) /
                              pow_int(lo, w) * density_sup(mu, lo, hi);
        if (height > 0.0)
            regions.push_back({TiltedGrid::Kind::Panel, lo, hi, height, 1.0,
                               height * (hi - lo)});
        lo = hi;
    }

    grid->regions = std::move(regions);
    grid->cum.reserve(grid->regions.size());
    double acc = 0.0;
    for (const auto& r : grid->regions) grid->cum.push_back(acc += r.mass);
    return grid;
}

} // namespace detail

std::int64_t Configuration::total() const {
    return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

bool dominated_by(const Configuration& a, const Configuration& b) {
    if (a.counts.size() != b.counts.size()) return false;
    for (std::size_t v = 0; v < a.counts.size(); ++v)
        if (a.counts[v] > b.counts[v]) return false;
    return true;
}

std::int64_t sample_binomial(std::int64_t n, double z, CounterRng& rng) {
    if (n <= 0) return 0;
    if (z >= 1.0) return n;
    if (z <= 0.0) return 0;
    const double lq = std::log1p(-z);
    std::int64_t k = 0;
    std::int64_t pos = 0;
    while (true) {
        const double skip =
            std::floor(std::log(rng.next_double_pos()) / lq);
        if (skip >= static_cast<double>(n - pos)) break;
        pos += static_cast<std::int64_t>(skip) + 1;
        if (pos > n) break;
        ++k;
    }
    return k;
}

std::int64_t sample_cond_binomial(std::int64_t n, double z, int w,
                                  CounterRng& rng) {
    if (n < w)
        throw PreconditionViolated("cond binomial: needs n >= w");
    if (z >= 1.0) return n;
    if (z <= 0.0)
        throw PreconditionViolated("cond binomial: needs z > 0");
    const double tail = tilt(n, w, z); // P(K >= w)
    if (tail >= 0.1) {
        for (int iter = 0; iter < kSamplerCap; ++iter) {
            const std::int64_t k = sample_binomial(n, z, rng);
            if (k >= w) return k;
        }
        throw SamplerFailure("conditioned binomial: rejection cap exceeded");
    }
    // Rare tail (nz small, so no underflow below): inversion along the
    // conditional pmf, which decays geometrically from k = w.
    const double lq = std::log1p(-z);
    double term = std::exp(detail::lchoose(static_cast<double>(n),
                                           static_cast<double>(w)) +
                           w * std::log(z) + (n - w) * lq) /
                  tail;
    const double u = rng.next_double();
    double cum = 0.0;
    for (std::int64_t k = w;; ++k) {
        cum += term;
        if (u < cum || k >= n) return k;
        term *= static_cast<double>(n - k) / static_cast<double>(k + 1) * z /
                (1.0 - z);
    }
}

std::int64_t sample_hypergeometric(std::int64_t n, std::int64_t marked,
                                   std::int64_t draw, CounterRng& rng) {
    if (marked < 0 || draw < 0 || marked > n || draw > n)
        throw PreconditionViolated("hypergeometric: bad parameters");
    if (draw == n) return marked;
    std::int64_t k = 0;
    std::int64_t good = marked, remaining = n;
    for (std::int64_t i = 0; i < draw && good > 0; ++i) {
        if (rng.next_double() * static_cast<double>(remaining) <
            static_cast<double>(good)) {
            ++k;
            --good;
        }
        --remaining;
    }
    return k;
}

Simulator::Simulator(const SystemSpec& sys, SimOptions opts)
    : sys_(&sys), opts_(opts) {
    if (opts_.n_trunc < 1)
        throw PreconditionViolated("Simulator: n_trunc must be >= 1");
    const std::size_t V = sys.size();
    const std::int64_t cache_n =
        std::max<std::int64_t>(4 * opts_.n_trunc, 8192);
    auto add = [&](ActionKind kind, std::size_t from, std::size_t to,
                   const MeasureSpec& m) {
        if (m.is_zero()) return;
        Channel c{kind, from, to, &m,
                  std::make_unique<RateCache>(m, kind, cache_n), nullptr};
        if (m.density_mass() > 0.0 && !m.atoms().empty())
            c.density_cache = std::make_unique<RateCache>(
                MeasureSpec(0.0, {}, m.density(), m.label()), kind, cache_n);
        channels_.push_back(std::move(c));
    };
    for (std::size_t v = 0; v < V; ++v) {
        add(ActionKind::Coalescence, v, v, sys.coalescence(v));
        add(ActionKind::Death, v, v, sys.death(v));
    }
    for (std::size_t u = 0; u < V; ++u)
        for (std::size_t v = 0; v < V; ++v) {
            if (u != v) add(ActionKind::Migration, u, v, sys.migration(u, v));
            add(ActionKind::Reproduction, u, v, sys.reproduction(u, v));
        }
}

Simulator::~Simulator() = default;

Configuration Simulator::initial_configuration() const {
    Configuration c;
    c.counts.reserve(sys_->size());
    for (std::size_t v = 0; v < sys_->size(); ++v) {
        const InitialCount& ic = sys_->initial(v);
        c.counts.push_back(ic.is_infinite ? opts_.n_trunc : ic.count);
    }
    return c;
}

double Simulator::channel_rate(const Channel& c, std::int64_t n) const {
    return c.cache->total(n);
}

double Simulator::independent_rate(const Channel& c, std::int64_t n) const {
    const double nd = static_cast<double>(n);
    return c.kind == ActionKind::Coalescence
               ? c.measure->atom_zero() * 0.5 * nd * (nd - 1.0)
               : c.measure->atom_zero() * nd;
}

double Simulator::total_rate_of(const Configuration& state) const {
    double total = 0.0;
    for (const auto& c : channels_)
        total += channel_rate(c, state.counts[c.from]);
    return total;
}

std::size_t Simulator::pick_channel(const Configuration& state, double total,
                                    CounterRng& rng) const {
    double u = rng.next_double() * total;
    for (std::size_t i = 0; i < channels_.size(); ++i) {
        const double r = channel_rate(channels_[i], state.counts[channels_[i].from]);
        if (u < r) return i;
        u -= r;
    }
    for (std::size_t i = channels_.size(); i-- > 0;)
        if (channel_rate(channels_[i], state.counts[channels_[i].from]) > 0.0)
            return i;
    throw Absorbed("pick_channel: zero total rate");
}

double Simulator::sample_tilted_density(std::size_t channel, std::int64_t n,
                                        CounterRng& rng) {
    const Channel& c = channels_[channel];
    const std::int64_t bucket =
        static_cast<std::int64_t>(std::bit_ceil(static_cast<std::uint64_t>(
            std::max<std::int64_t>(n, weight_of(c.kind)))));
    auto& slot = grids_[{channel, bucket}];
    if (!slot)
        slot = detail::build_tilted_grid(*c.measure, weight_of(c.kind), bucket);
    return slot->sample(n, rng);
}

double Simulator::sample_tilted(std::size_t channel, std::int64_t n,
                                CounterRng& rng) {
    const Channel& c = channels_[channel];
    const int w = weight_of(c.kind);
    if (c.measure->atoms().empty())
        return sample_tilted_density(channel, n, rng);
    // Exact split between point masses and the density part.
    const double density_rate =
        c.density_cache ? c.density_cache->total(n) : 0.0;
    double total = density_rate;
    for (const auto& a : c.measure->atoms())
        total += tilt(n, w, a.z) / pow_int(a.z, w) * a.mass;
    double u = rng.next_double() * total;
    for (const auto& a : c.measure->atoms()) {
        const double wa = tilt(n, w, a.z) / pow_int(a.z, w) * a.mass;
        if (u < wa) return a.z;
        u -= wa;
    }
    return sample_tilted_density(channel, n, rng);
}

void Simulator::apply(Configuration& state, ActionKind kind, std::size_t from,
                      std::size_t to, std::int64_t k) const {
    switch (kind) {
        case ActionKind::Coalescence: state.counts[from] -= k - 1; break;
        case ActionKind::Death: state.counts[from] -= k; break;
        case ActionKind::Migration:
            state.counts[from] -= k;
            state.counts[to] += k;
            break;
        case ActionKind::Reproduction: state.counts[to] += k; break;
    }
}

EventRecord Simulator::make_record(const Configuration& state, double time,
                                   ActionKind kind, bool coordinated,
                                   std::size_t from, std::size_t to, double z,
                                   std::int64_t k) const {
    EventRecord ev;
    ev.time = time;
    ev.kind = kind;
    ev.coordinated = coordinated;
    ev.site_from = from;
    ev.site_to = to;
    ev.z = z;
    ev.participants = k;
    ev.after.emplace_back(from, state.counts[from]);
    if (to != from) ev.after.emplace_back(to, state.counts[to]);
    return ev;
}

EventRecord Simulator::step(Configuration& state, double now,
                            CounterRng& rng) {
    if (state.counts.size() != sys_->size())
        throw PreconditionViolated("step: state size mismatch");
    const double total = total_rate_of(state);
    if (total <= 0.0) throw Absorbed("step: zero total event rate");
    const double t = now + rng.next_exponential(total);

    const std::size_t ci = pick_channel(state, total, rng);
    const Channel& c = channels_[ci];
    const std::int64_t n = state.counts[c.from];
    const int w = weight_of(c.kind);

    const double r_all = channel_rate(c, n);
    const double r_ind = independent_rate(c, n);
    double z = 0.0;
    std::int64_t k = w;
    bool coordinated = false;
    if (rng.next_double() * r_all >= r_ind) {
        coordinated = true;
        z = sample_tilted(ci, n, rng);
        k = sample_cond_binomial(n, z, w, rng);
    }
    apply(state, c.kind, c.from, c.to, k);
    return make_record(state, t, c.kind, coordinated, c.from, c.to, z, k);
}

Trajectory Simulator::simulate(double t_max, CounterRng rng) {
    if (t_max <= 0.0)
        throw PreconditionViolated("simulate: t_max must be positive");
    Trajectory traj;
    traj.initial = initial_configuration();
    traj.stream_id = rng.key();
    traj.terminal_time = t_max;

    Configuration state = traj.initial;
    double t = 0.0;
    while (true) {
        if (traj.events.size() >=
            static_cast<std::size_t>(opts_.max_events)) {
            traj.final_state = state;
            traj.terminal_time = t;
            throw EventBudgetExceeded("simulate: event budget exceeded",
                                      std::move(traj));
        }
        Configuration next = state;
        EventRecord ev;
        try {
            ev = step(next, t, rng);
        } catch (const Absorbed&) {
            break;
        }
        if (ev.time > t_max) break;
        state = std::move(next);
        t = ev.time;
        traj.events.push_back(std::move(ev));
    }
    traj.final_state = std::move(state);
    return traj;
}

std::pair<Trajectory, Trajectory> Simulator::simulate_coupled(
    const Configuration& pi1, const Configuration& pi2, double t_max,
    CounterRng rng) {
    if (t_max <= 0.0)
        throw PreconditionViolated("simulate_coupled: t_max must be positive");
    if (pi1.counts.size() != sys_->size() ||
        pi2.counts.size() != sys_->size())
        throw PreconditionViolated("simulate_coupled: state size mismatch");
    if (!dominated_by(pi1, pi2))
        throw PreconditionViolated(
            "simulate_coupled: pi1 must be dominated by pi2");

    Trajectory traj1, traj2;
    traj1.initial = pi1;
    traj2.initial = pi2;
    traj1.stream_id = traj2.stream_id = rng.key();
    traj1.terminal_time = traj2.terminal_time = t_max;

    Configuration s1 = pi1, s2 = pi2;
    double t = 0.0;
    std::uint64_t candidates = 0;
    while (true) {
        const double total2 = total_rate_of(s2);
        if (total2 <= 0.0) break;
        t += rng.next_exponential(total2);
        if (t > t_max) break;
        if (++candidates > opts_.max_events) {
            traj2.final_state = s2;
            traj2.terminal_time = t;
            throw EventBudgetExceeded(
                "simulate_coupled: event budget exceeded", std::move(traj2));
        }

        const std::size_t ci = pick_channel(s2, total2, rng);
        const Channel& c = channels_[ci];
        const int w = weight_of(c.kind);
        const std::int64_t n2 = s2.counts[c.from];
        const std::int64_t n1 = s1.counts[c.from];

        const double r_all = channel_rate(c, n2);
        const double r_ind = independent_rate(c, n2);
        double z = 0.0;
        std::int64_t k2 = w, k1 = 0;
        bool coordinated = false;
        if (rng.next_double() * r_all < r_ind) {
            // The minimal participant set is a uniform label subset; the
            // smaller system is hit when the subset lands inside it.
            double p_inside;
            if (w == 2) {
                p_inside =
                    n1 >= 2 ? (static_cast<double>(n1) *
                               static_cast<double>(n1 - 1)) /
                                  (static_cast<double>(n2) *
                                   static_cast<double>(n2 - 1))
                            : 0.0;
            } else {
                p_inside = static_cast<double>(n1) / static_cast<double>(n2);
            }
            k1 = rng.next_bernoulli(p_inside) ? w : 0;
        } else {
            coordinated = true;
            z = sample_tilted(ci, n2, rng);
            k2 = sample_cond_binomial(n2, z, w, rng);
            k1 = n1 == n2 ? k2 : sample_hypergeometric(n2, k2, n1, rng);
        }

        apply(s2, c.kind, c.from, c.to, k2);
        traj2.events.push_back(
            make_record(s2, t, c.kind, coordinated, c.from, c.to, z, k2));
        if (k1 >= w) {
            apply(s1, c.kind, c.from, c.to, k1);
            traj1.events.push_back(
                make_record(s1, t, c.kind, coordinated, c.from, c.to, z, k1));
        }
        if (!dominated_by(s1, s2))
            throw OrderingViolation(
                "simulate_coupled: domination broken at t=" +
                std::to_string(t));
    }
    traj1.final_state = std::move(s1);
    traj2.final_state = std::move(s2);
    return {std::move(traj1), std::move(traj2)};
}

Trajectory simulate(const SystemSpec& sys, double t_max, CounterRng rng,
                    SimOptions opts) {
    Simulator sim(sys, opts);
    return sim.simulate(t_max, std::move(rng));
}

std::pair<Trajectory, Trajectory> simulate_coupled(const SystemSpec& sys,
                                                   const Configuration& pi1,
                                                   const Configuration& pi2,
                                                   double t_max, CounterRng rng,
                                                   SimOptions opts) {
    Simulator sim(sys, opts);
    return sim.simulate_coupled(pi1, pi2, t_max, std::move(rng));
}

std::int64_t simulate_with_entries(const MeasureSpec& lambda,
                                   const MeasureSpec& death,
                                   const EntrySchedule& schedule, double t0,
                                   CounterRng rng, SimOptions opts) {
    if (t0 < 0.0)
        throw PreconditionViolated("simulate_with_entries: t0 must be >= 0");
    for (std::size_t i = 0; i < schedule.times.size(); ++i) {
        if (schedule.times[i] > t0)
            throw PreconditionViolated(
                "simulate_with_entries: entry after t0");
        if (i > 0 && schedule.times[i] < schedule.times[i - 1])
            throw PreconditionViolated(
                "simulate_with_entries: entries must be nondecreasing");
    }

    SystemSpec sys = SystemBuilder({"site"})
                         .coalescence("site", lambda)
                         .death("site", death)
                         .build();
    Simulator sim(sys, opts);
    Configuration state{{0}};
    double t = 0.0;
    std::size_t next_entry = 0;
    std::uint64_t events = 0;
    while (true) {
        const double entry_time = next_entry < schedule.times.size()
                                      ? schedule.times[next_entry]
                                      : std::numeric_limits<double>::infinity();
        Configuration cand = state;
        double event_time = std::numeric_limits<double>::infinity();
        EventRecord ev;
        bool have_event = false;
        try {
            ev = sim.step(cand, t, rng);
            event_time = ev.time;
            have_event = true;
        } catch (const Absorbed&) {
        }
        if (entry_time <= std::min(event_time, t0)) {
            t = entry_time;
            ++state.counts[0];
            ++next_entry;
            continue;
        }
        if (!have_event || event_time > t0) break;
        if (++events > opts.max_events) {
            Trajectory partial;
            partial.initial = Configuration{{0}};
            partial.final_state = state;
            partial.terminal_time = t;
            throw EventBudgetExceeded(
                "simulate_with_entries: event budget exceeded",
                std::move(partial));
        }
        state = std::move(cand);
        t = event_time;
    }
    return state.counts[0];
}

} // namespace coordsim
