#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "coordsim/graph.hpp"
#include "coordsim/rates.hpp"
#include "coordsim/rng.hpp"

namespace coordsim {

/// Finite per-site particle counts.  Infinite initial conditions enter
/// simulation only after truncation.
struct Configuration {
    std::vector<std::int64_t> counts;

    std::int64_t total() const;
    bool operator==(const Configuration&) const = default;
};

/// a <= b componentwise (sizes must match).
bool dominated_by(const Configuration& a, const Configuration& b);

/// One jump of the particle system.  Coordinated events carry the sampled
/// participation probability z and the participant count K; events from the
/// atom at zero act on the minimal set (a pair for coalescence, one particle
/// otherwise) and carry z = 0.
struct EventRecord {
    double time = 0.0;
    ActionKind kind = ActionKind::Coalescence;
    bool coordinated = false;
    std::size_t site_from = 0;
    std::size_t site_to = 0;
    double z = 0.0;
    std::int64_t participants = 0;
    /// (site, count) after the event, for the sites the event touched.
    std::vector<std::pair<std::size_t, std::int64_t>> after;
};

struct Trajectory {
    Configuration initial;
    Configuration final_state;
    std::vector<EventRecord> events;
    double terminal_time = 0.0;
    /// Key of the stream that produced the run; replay is bit-identical.
    std::uint64_t stream_id = 0;
};

/// Entry times for the staggered-start block-counting run; each time adds
/// one particle.  Times must be nondecreasing.
struct EntrySchedule {
    std::vector<double> times;
};

struct SimOptions {
    std::int64_t n_trunc = 2000;
    std::uint64_t max_events = 10000000;
};

/// Thrown when the event budget is exhausted; carries what was simulated.
class EventBudgetExceeded : public std::runtime_error {
public:
    EventBudgetExceeded(const std::string& what, Trajectory partial)
        : std::runtime_error(what),
          partial_(std::make_shared<Trajectory>(std::move(partial))) {}

    const Trajectory& partial() const { return *partial_; }

private:
    std::shared_ptr<const Trajectory> partial_;
};

namespace detail {
struct TiltedGrid;
}

/// Advances configurations of one system.  Owns the per-channel rate
/// caches (shared-safe) and the mutable tilted-z sampling grids, so one
/// Simulator serves one logical thread; build one per replicate.
class Simulator {
public:
    explicit Simulator(const SystemSpec& sys, SimOptions opts = {});
    ~Simulator();
    Simulator(const Simulator&) = delete;
    Simulator& operator=(const Simulator&) = delete;

    const SystemSpec& system() const { return *sys_; }
    const SimOptions& options() const { return opts_; }

    /// Initial configuration with infinite entries truncated to n_trunc.
    Configuration initial_configuration() const;

    /// One jump from `state` at time `now`.  Advances the state in place
    /// and returns the record.  Throws Absorbed at zero total rate.
    EventRecord step(Configuration& state, double now, CounterRng& rng);

    /// Runs from the truncated initial configuration until t_max.
    /// Absorption ends the event list early; the process then sits still.
    Trajectory simulate(double t_max, CounterRng rng);

    /// One shared event stream drives both runs; the smaller one sees the
    /// thinning of the larger one's events through label subsets (realized
    /// as a hypergeometric projection of each participant count, the exact
    /// law of per-label coins under exchangeability).  Domination is
    /// asserted after every event.
    std::pair<Trajectory, Trajectory> simulate_coupled(const Configuration& pi1,
                                                       const Configuration& pi2,
                                                       double t_max,
                                                       CounterRng rng);

private:
    struct Channel {
        ActionKind kind;
        std::size_t from;
        std::size_t to;
        const MeasureSpec* measure;
        std::unique_ptr<RateCache> cache;
        /// Density part alone, present only when atoms and a density mix.
        std::unique_ptr<RateCache> density_cache;
    };

    double channel_rate(const Channel& c, std::int64_t n) const;
    double independent_rate(const Channel& c, std::int64_t n) const;
    /// Samples z from tilt_n(z) z^{-w} mu+(dz) restricted to the density
    /// part; atoms in (0, 1] are handled by exact enumeration outside.
    double sample_tilted_density(std::size_t channel, std::int64_t n,
                                 CounterRng& rng);
    double sample_tilted(std::size_t channel, std::int64_t n, CounterRng& rng);
    std::size_t pick_channel(const Configuration& state, double total,
                             CounterRng& rng) const;
    double total_rate_of(const Configuration& state) const;
    void apply(Configuration& state, ActionKind kind, std::size_t from,
               std::size_t to, std::int64_t k) const;
    EventRecord make_record(const Configuration& state, double now,
                            ActionKind kind, bool coordinated,
                            std::size_t from, std::size_t to, double z,
                            std::int64_t k) const;

    const SystemSpec* sys_;
    SimOptions opts_;
    std::vector<Channel> channels_;
    std::map<std::pair<std::size_t, std::int64_t>,
             std::unique_ptr<detail::TiltedGrid>>
        grids_;
};

Trajectory simulate(const SystemSpec& sys, double t_max, CounterRng rng,
                    SimOptions opts = {});

std::pair<Trajectory, Trajectory> simulate_coupled(const SystemSpec& sys,
                                                   const Configuration& pi1,
                                                   const Configuration& pi2,
                                                   double t_max, CounterRng rng,
                                                   SimOptions opts = {});

/// Block-counting run of a single-site coalescent with death in which
/// particles enter one at a time at the schedule's times.  Returns the
/// count at t0.  Requires nondecreasing times <= t0.
std::int64_t simulate_with_entries(const MeasureSpec& lambda,
                                   const MeasureSpec& death,
                                   const EntrySchedule& schedule, double t0,
                                   CounterRng rng, SimOptions opts = {});

/// K ~ Binomial(n, z) by geometric jumps over failures; O(nz + 1) expected.
std::int64_t sample_binomial(std::int64_t n, double z, CounterRng& rng);

/// K ~ Binomial(n, z) conditioned on K >= w, by rejection.
std::int64_t sample_cond_binomial(std::int64_t n, double z, int w,
                                  CounterRng& rng);

/// Number of marked items in a uniform subset of size `draw` from a
/// population of `n` with `marked` marked items.
std::int64_t sample_hypergeometric(std::int64_t n, std::int64_t marked,
                                   std::int64_t draw, CounterRng& rng);

} // namespace coordsim
