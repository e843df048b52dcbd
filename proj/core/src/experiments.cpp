#include "coordsim/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <memory>
#include <mutex>
#include <thread>
#include <utility>

#include "coordsim/criteria.hpp"
#include "coordsim/errors.hpp"
#include "coordsim/stats.hpp"

namespace coordsim {

namespace {

constexpr std::int64_t kProbReps = 10000;
constexpr std::int64_t kMeanReps = 1000;

std::int64_t pick_reps(const McOptions& opts, std::int64_t fallback) {
    if (opts.reps < 0) throw PreconditionViolated("replicate count must be nonnegative");
    return opts.reps > 0 ? opts.reps : fallback;
}

// Runs `body(state, rep)` for rep = 0..reps-1.  Each worker thread owns one
// `setup()` result (a Simulator, so its rate caches stay warm), replicates
// are handed out through an atomic counter, and the body writes into
// per-replicate slots, so results do not depend on the thread count.
template <typename Setup, typename Body>
void run_replicates(std::int64_t reps, int threads, Setup setup, Body body) {
    const int workers =
        static_cast<int>(std::min<std::int64_t>(std::max(threads, 1), std::max<std::int64_t>(reps, 1)));
    if (workers <= 1) {
        auto state = setup();
        for (std::int64_t rep = 0; rep < reps; ++rep) body(*state, rep);
        return;
    }
    std::atomic<std::int64_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mu;
    auto worker = [&] {
        try {
            auto state = setup();
            for (;;) {
                const std::int64_t rep = next.fetch_add(1, std::memory_order_relaxed);
                if (rep >= reps) return;
                body(*state, rep);
            }
        } catch (...) {
            {
                const std::lock_guard<std::mutex> lock(error_mu);
                if (!first_error) first_error = std::current_exception();
            }
            next.store(reps, std::memory_order_relaxed);
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

SystemSpec single_site(const MeasureSpec& lambda, const MeasureSpec& death,
                       std::int64_t n) {
    SystemBuilder b({"site"});
    b.coalescence("site", lambda);
    b.death("site", death);
    b.initial("site", InitialCount::finite(n));
    return b.build();
}

SimOptions sim_options(const McOptions& opts, std::int64_t n_needed) {
    SimOptions s = opts.sim;
    s.n_trunc = std::max(s.n_trunc, n_needed);
    return s;
}

Estimate wilson_estimate(std::int64_t successes, std::int64_t reps,
                         std::uint64_t seed) {
    const Interval ci = wilson_95(successes, reps);
    return {static_cast<double>(successes) / static_cast<double>(reps),
            ci.lo, ci.hi, reps, seed};
}

Estimate mean_estimate(const std::vector<double>& xs, std::uint64_t seed) {
    const MeanSe m = mean_se(xs);
    return {m.mean, m.mean - 2.0 * m.se, m.mean + 2.0 * m.se,
            static_cast<std::int64_t>(xs.size()), seed};
}

// Per-replicate migration totals for the canonical one-way two-site layout:
// particles start at the source, the target is inert, and the statistic is
// the number of migrated particles by time t.
std::vector<double> migration_counts(const SystemSpec& sys,
                                     std::int64_t n_start, double t,
                                     const McOptions& opts,
                                     std::int64_t reps) {
    if (sys.size() != 2)
        throw PreconditionViolated("migration count: needs a two-site system");
    if (n_start < 1)
        throw PreconditionViolated("migration count: needs at least one particle");
    if (!(t > 0.0))
        throw PreconditionViolated("migration count: time horizon must be positive");
    for (std::size_t u = 0; u < 2; ++u)
        for (std::size_t v = 0; v < 2; ++v)
            if (!sys.reproduction(u, v).is_zero())
                throw PreconditionViolated(
                    "migration count: reproduction channels are not allowed");
    const bool fwd = !sys.migration(0, 1).is_zero();
    const bool bwd = !sys.migration(1, 0).is_zero();
    if (fwd && bwd)
        throw PreconditionViolated(
            "migration count: needs migration in one direction only");
    const std::size_t src = bwd ? 1 : 0;
    const std::size_t dst = 1 - src;
    if (!sys.coalescence(dst).is_zero() || !sys.death(dst).is_zero())
        throw PreconditionViolated("migration count: target site must be inert");

    SystemBuilder b({sys.name(0), sys.name(1)});
    b.coalescence(sys.name(0), sys.coalescence(0));
    b.coalescence(sys.name(1), sys.coalescence(1));
    b.death(sys.name(0), sys.death(0));
    b.death(sys.name(1), sys.death(1));
    b.migration(sys.name(0), sys.name(1), sys.migration(0, 1));
    b.migration(sys.name(1), sys.name(0), sys.migration(1, 0));
    b.initial(sys.name(src), InitialCount::finite(n_start));
    b.initial(sys.name(dst), InitialCount::finite(0));
    const SystemSpec run_sys = b.build();

    const SimOptions sim_opts = sim_options(opts, n_start);
    const CounterRng root(opts.seed);
    std::vector<double> counts(static_cast<std::size_t>(reps), 0.0);
    run_replicates(
        reps, opts.threads,
        [&] { return std::make_unique<Simulator>(run_sys, sim_opts); },
        [&](Simulator& sim, std::int64_t rep) {
            const Trajectory tr =
                sim.simulate(t, root.derive(static_cast<std::uint64_t>(rep)));
            std::int64_t migrated = 0;
            for (const EventRecord& ev : tr.events)
                if (ev.kind == ActionKind::Migration) migrated += ev.participants;
            counts[static_cast<std::size_t>(rep)] =
                static_cast<double>(migrated);
        });
    return counts;
}

}  // namespace

Estimate estimate_hit_prob(const MeasureSpec& lambda, const MeasureSpec& death,
                           std::int64_t n_start, HitTarget target,
                           const McOptions& opts) {
    if (target.level < 1)
        throw PreconditionViolated("hit probability: level must be positive");
    if (target.width < 0)
        throw PreconditionViolated("hit probability: band width must be nonnegative");
    if (n_start <= target.level + target.width)
        throw PreconditionViolated(
            "hit probability: start must lie above the target band");
    const std::int64_t reps = pick_reps(opts, kProbReps);
    const SystemSpec sys = single_site(lambda, death, n_start);
    const SimOptions sim_opts = sim_options(opts, n_start);
    const CounterRng root(opts.seed);
    const std::int64_t band_top = target.level + target.width;

    std::vector<unsigned char> hits(static_cast<std::size_t>(reps), 0);
    run_replicates(
        reps, opts.threads,
        [&] { return std::make_unique<Simulator>(sys, sim_opts); },
        [&](Simulator& sim, std::int64_t rep) {
            CounterRng rng = root.derive(static_cast<std::uint64_t>(rep));
            Configuration state = sim.initial_configuration();
            std::int64_t cur = state.counts[0];
            try {
                while (cur > band_top) {
                    sim.step(state, 0.0, rng);
                    cur = state.counts[0];
                }
            } catch (const Absorbed&) {
                // Stuck above the band: counted as a miss below.
            }
            hits[static_cast<std::size_t>(rep)] =
                (cur >= target.level && cur <= band_top) ? 1 : 0;
        });

    std::int64_t successes = 0;
    for (const unsigned char h : hits) successes += h;
    return wilson_estimate(successes, reps, opts.seed);
}

std::vector<Estimate> hit_level_profile(const MeasureSpec& lambda,
                                        const MeasureSpec& death,
                                        std::int64_t n_start, std::int64_t k_lo,
                                        std::int64_t k_hi,
                                        const McOptions& opts) {
    if (k_lo < 1 || k_lo > k_hi)
        throw PreconditionViolated("hit profile: needs 1 <= k_lo <= k_hi");
    if (n_start <= k_hi)
        throw PreconditionViolated("hit profile: start must lie above every level");
    const std::int64_t reps = pick_reps(opts, kProbReps);
    const SystemSpec sys = single_site(lambda, death, n_start);
    const SimOptions sim_opts = sim_options(opts, n_start);
    const CounterRng root(opts.seed);
    const std::size_t levels = static_cast<std::size_t>(k_hi - k_lo + 1);

    // One shared path ensemble answers every level: a row marks the levels
    // the descending chain lands on before it drops below k_lo.
    std::vector<unsigned char> visited(static_cast<std::size_t>(reps) * levels, 0);
    run_replicates(
        reps, opts.threads,
        [&] { return std::make_unique<Simulator>(sys, sim_opts); },
        [&](Simulator& sim, std::int64_t rep) {
            CounterRng rng = root.derive(static_cast<std::uint64_t>(rep));
            Configuration state = sim.initial_configuration();
            std::int64_t cur = state.counts[0];
            unsigned char* row =
                visited.data() + static_cast<std::size_t>(rep) * levels;
            try {
                while (cur > k_lo) {
                    sim.step(state, 0.0, rng);
                    cur = state.counts[0];
                    if (cur >= k_lo && cur <= k_hi)
                        row[static_cast<std::size_t>(cur - k_lo)] = 1;
                }
            } catch (const Absorbed&) {
            }
        });

    std::vector<Estimate> out;
    out.reserve(levels);
    for (std::size_t j = 0; j < levels; ++j) {
        std::int64_t successes = 0;
        for (std::int64_t rep = 0; rep < reps; ++rep)
            successes += visited[static_cast<std::size_t>(rep) * levels + j];
        out.push_back(wilson_estimate(successes, reps, opts.seed));
    }
    return out;
}

Estimate estimate_migration_count(const SystemSpec& sys, std::int64_t n_start,
                                  double t, const McOptions& opts) {
    const std::int64_t reps = pick_reps(opts, kMeanReps);
    const std::vector<double> counts =
        migration_counts(sys, n_start, t, opts, reps);
    return mean_estimate(counts, opts.seed);
}

GrowthTable migration_growth(const SystemSpec& sys,
                             const std::vector<std::int64_t>& sweep, double t,
                             const McOptions& opts) {
    if (sweep.size() < 2)
        throw PreconditionViolated("migration growth: needs at least two sizes");
    for (std::size_t i = 0; i < sweep.size(); ++i) {
        if (sweep[i] < 1)
            throw PreconditionViolated("migration growth: sizes must be positive");
        if (i > 0 && sweep[i] <= sweep[i - 1])
            throw PreconditionViolated(
                "migration growth: sizes must be strictly increasing");
    }
    const std::int64_t reps = pick_reps(opts, kMeanReps);

    GrowthTable table;
    table.rows.reserve(sweep.size());
    double sum_x = 0.0;
    for (const std::int64_t n : sweep) {
        std::vector<double> counts = migration_counts(sys, n, t, opts, reps);
        GrowthRow row;
        row.n_start = n;
        row.median_count = median(counts);
        row.mean_count = mean_estimate(counts, opts.seed);
        table.rows.push_back(std::move(row));
        sum_x += std::log(static_cast<double>(n));
    }

    // Least-squares slope of log(median + 1) against log n; the +1 keeps a
    // saturating or empty count from blowing up the log.
    const double x_bar = sum_x / static_cast<double>(sweep.size());
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < sweep.size(); ++i) {
        const double dx = std::log(static_cast<double>(sweep[i])) - x_bar;
        sxy += dx * std::log(table.rows[i].median_count + 1.0);
        sxx += dx * dx;
    }
    table.slope = sxy / sxx;
    table.growing = table.slope > table.threshold;
    return table;
}

std::vector<SpeedPoint> estimate_block_speed(const MeasureSpec& lambda,
                                             std::int64_t n_start,
                                             const std::vector<double>& ts,
                                             const McOptions& opts) {
    if (n_start < 2)
        throw PreconditionViolated("block speed: needs at least two particles");
    if (ts.empty())
        throw PreconditionViolated("block speed: needs at least one time");
    for (std::size_t i = 0; i < ts.size(); ++i) {
        if (!(ts[i] > 0.0))
            throw PreconditionViolated("block speed: times must be positive");
        if (i > 0 && ts[i] <= ts[i - 1])
            throw PreconditionViolated("block speed: times must be increasing");
    }
    const Verdict cdi = comes_down(lambda);
    if (cdi.outcome != Outcome::Positive)
        throw PreconditionViolated(
            "block speed: coalescent must come down from infinity");

    const std::int64_t reps = pick_reps(opts, kMeanReps);
    const SystemSpec sys = single_site(lambda, MeasureSpec(), n_start);
    const SimOptions sim_opts = sim_options(opts, n_start);
    const CounterRng root(opts.seed);
    const std::size_t grid = ts.size();
    const double t_end = ts.back();

    std::vector<double> blocks(static_cast<std::size_t>(reps) * grid, 0.0);
    run_replicates(
        reps, opts.threads,
        [&] { return std::make_unique<Simulator>(sys, sim_opts); },
        [&](Simulator& sim, std::int64_t rep) {
            const Trajectory tr =
                sim.simulate(t_end, root.derive(static_cast<std::uint64_t>(rep)));
            double* row = blocks.data() + static_cast<std::size_t>(rep) * grid;
            std::size_t ei = 0;
            std::int64_t cur = tr.initial.counts[0];
            for (std::size_t j = 0; j < grid; ++j) {
                while (ei < tr.events.size() && tr.events[ei].time <= ts[j]) {
                    cur = tr.events[ei].after.front().second;
                    ++ei;
                }
                row[j] = static_cast<double>(cur);
            }
        });

    const double c = lambda.atom_zero();
    std::vector<SpeedPoint> out;
    out.reserve(grid);
    std::vector<double> column(static_cast<std::size_t>(reps));
    for (std::size_t j = 0; j < grid; ++j) {
        for (std::int64_t rep = 0; rep < reps; ++rep)
            column[static_cast<std::size_t>(rep)] =
                blocks[static_cast<std::size_t>(rep) * grid + j];
        const MeanSe m = mean_se(column);
        SpeedPoint p;
        p.t = ts[j];
        p.mean_blocks = m.mean;
        p.se = m.se;
        p.normalized = m.mean * c * ts[j] / 2.0;
        out.push_back(p);
    }
    return out;
}

std::vector<MeanPoint> estimate_mean_total(const SystemSpec& sys,
                                           std::int64_t n,
                                           const std::vector<double>& ts,
                                           const McOptions& opts) {
    if (sys.size() == 0)
        throw PreconditionViolated("mean total: needs at least one site");
    if (n < 1)
        throw PreconditionViolated("mean total: needs at least one particle per site");
    if (ts.empty())
        throw PreconditionViolated("mean total: needs at least one time");
    for (std::size_t i = 0; i < ts.size(); ++i) {
        if (!(ts[i] > 0.0))
            throw PreconditionViolated("mean total: times must be positive");
        if (i > 0 && ts[i] <= ts[i - 1])
            throw PreconditionViolated("mean total: times must be increasing");
    }
    for (std::size_t v = 0; v < sys.size(); ++v) {
        if (!sys.death(v).is_zero())
            throw PreconditionViolated("mean total: death channels are not allowed");
        for (std::size_t u = 0; u < sys.size(); ++u)
            if (!sys.reproduction(u, v).is_zero())
                throw PreconditionViolated(
                    "mean total: reproduction channels are not allowed");
    }

    SystemBuilder b(sys.names());
    for (std::size_t v = 0; v < sys.size(); ++v) {
        b.coalescence(sys.name(v), sys.coalescence(v));
        b.initial(sys.name(v), InitialCount::finite(n));
        for (std::size_t u = 0; u < sys.size(); ++u)
            if (u != v) b.migration(sys.name(u), sys.name(v), sys.migration(u, v));
    }
    const SystemSpec run_sys = b.build();

    const std::int64_t reps = pick_reps(opts, kMeanReps);
    const SimOptions sim_opts = sim_options(opts, n);
    const CounterRng root(opts.seed);
    const std::size_t grid = ts.size();
    const double t_end = ts.back();

    std::vector<double> totals(static_cast<std::size_t>(reps) * grid, 0.0);
    run_replicates(
        reps, opts.threads,
        [&] { return std::make_unique<Simulator>(run_sys, sim_opts); },
        [&](Simulator& sim, std::int64_t rep) {
            const Trajectory tr =
                sim.simulate(t_end, root.derive(static_cast<std::uint64_t>(rep)));
            double* row = totals.data() + static_cast<std::size_t>(rep) * grid;
            std::size_t ei = 0;
            std::vector<std::int64_t> counts = tr.initial.counts;
            for (std::size_t j = 0; j < grid; ++j) {
                while (ei < tr.events.size() && tr.events[ei].time <= ts[j]) {
                    for (const auto& [site, count] : tr.events[ei].after)
                        counts[site] = count;
                    ++ei;
                }
                std::int64_t total = 0;
                for (const std::int64_t cnt : counts) total += cnt;
                row[j] = static_cast<double>(total);
            }
        });

    std::vector<MeanPoint> out;
    out.reserve(grid);
    std::vector<double> column(static_cast<std::size_t>(reps));
    for (std::size_t j = 0; j < grid; ++j) {
        for (std::int64_t rep = 0; rep < reps; ++rep)
            column[static_cast<std::size_t>(rep)] =
                totals[static_cast<std::size_t>(rep) * grid + j];
        const MeanSe m = mean_se(column);
        out.push_back({ts[j], m.mean, m.se});
    }
    return out;
}

LossDistribution zeta_empirical(const MeasureSpec& lambda,
                                const MeasureSpec& death, std::int64_t n,
                                std::int64_t samples, const McOptions& opts) {
    if (n < 2)
        throw PreconditionViolated("empirical loss law: needs n >= 2");
    if (samples < 1)
        throw PreconditionViolated("empirical loss law: needs at least one sample");
    const SystemSpec sys = single_site(lambda, death, n);
    const SimOptions sim_opts = sim_options(opts, n);
    const CounterRng root(opts.seed);

    std::vector<std::int64_t> losses(static_cast<std::size_t>(samples), 0);
    run_replicates(
        samples, opts.threads,
        [&] { return std::make_unique<Simulator>(sys, sim_opts); },
        [&](Simulator& sim, std::int64_t rep) {
            CounterRng rng = root.derive(static_cast<std::uint64_t>(rep));
            Configuration state = sim.initial_configuration();
            try {
                sim.step(state, 0.0, rng);
            } catch (const Absorbed&) {
                throw DegenerateChain("empirical loss law: no jumps available");
            }
            losses[static_cast<std::size_t>(rep)] = n - state.counts[0];
        });

    std::vector<std::int64_t> freq(static_cast<std::size_t>(n), 0);
    for (const std::int64_t loss : losses)
        ++freq.at(static_cast<std::size_t>(loss - 1));
    LossDistribution out;
    out.n = n;
    out.zeta.resize(static_cast<std::size_t>(n));
    std::int64_t assigned = 0;
    for (std::size_t k = 0; k < out.zeta.size(); ++k) {
        out.zeta[k] = static_cast<double>(freq[k]) / static_cast<double>(samples);
        assigned += freq[k];
    }
    out.deficit = static_cast<double>(samples - assigned) /
                  static_cast<double>(samples);
    return out;
}

}  // namespace coordsim
