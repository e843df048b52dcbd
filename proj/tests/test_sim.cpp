#include "coordsim/sim.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "doctest.h"
#include "testutil.hpp"

using namespace coordsim;
using testutil::choose;
using testutil::random_measure;

namespace {

// Critical values of the chi-square distribution at p = 0.999.
double chi2_crit(int df) {
    switch (df) {
        case 3: return 16.2662362;
        case 4: return 18.46682695;
        case 5: return 20.51500565;
        case 6: return 22.45774448;
        case 7: return 24.32188635;
        case 9: return 27.87716487;
        default: REQUIRE(false); return 0.0;
    }
}

double chi2_stat(const std::vector<std::int64_t>& obs,
                 const std::vector<double>& p, double n) {
    double s = 0.0;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        const double e = p[i] * n;
        s += (obs[i] - e) * (obs[i] - e) / e;
    }
    return s;
}

SystemSpec single_site(MeasureSpec lambda, MeasureSpec death = {},
                       std::int64_t start = 0) {
    SystemBuilder b({"u"});
    if (!lambda.is_zero()) b.coalescence("u", std::move(lambda));
    if (!death.is_zero()) b.death("u", std::move(death));
    b.initial("u", InitialCount::finite(start));
    return b.build();
}

// Replays every record against its class delta and checks the structural
// event invariants.
void validate_trajectory(const Trajectory& traj, const SystemSpec& sys) {
    Configuration state = traj.initial;
    double prev = 0.0;
    for (const EventRecord& ev : traj.events) {
        REQUIRE(ev.time > prev);
        prev = ev.time;
        const int w = weight_of(ev.kind);
        REQUIRE(ev.participants >= w);
        if (ev.coordinated) {
            REQUIRE(ev.z > 0.0);
            REQUIRE(ev.z <= 1.0);
        } else {
            REQUIRE(ev.participants == w);
        }
        const std::int64_t before = state.total();
        switch (ev.kind) {
            case ActionKind::Coalescence:
                state.counts[ev.site_from] -= ev.participants - 1;
                REQUIRE(state.total() < before);
                break;
            case ActionKind::Death:
                state.counts[ev.site_from] -= ev.participants;
                REQUIRE(state.total() < before);
                break;
            case ActionKind::Migration:
                state.counts[ev.site_from] -= ev.participants;
                state.counts[ev.site_to] += ev.participants;
                REQUIRE(state.total() == before);
                break;
            case ActionKind::Reproduction:
                state.counts[ev.site_to] += ev.participants;
                REQUIRE(state.total() > before);
                break;
        }
        for (const auto& [site, count] : ev.after) {
            REQUIRE(count >= 0);
            REQUIRE(state.counts[site] == count);
        }
        REQUIRE(prev <= traj.terminal_time);
    }
    REQUIRE(state == traj.final_state);
    (void)sys;
}

} // namespace

TEST_CASE("discrete samplers match exact laws") {
    CounterRng rng(0x51a7);

    // Binomial via geometric jumps: exact pmf, n = 12, z = 0.35.
    {
        const std::int64_t n = 12;
        const double z = 0.35;
        std::vector<std::int64_t> obs(5, 0); // bins 0-2, 3, 4, 5, 6+
        const int N = 100000;
        for (int i = 0; i < N; ++i) {
            const std::int64_t k = sample_binomial(n, z, rng);
            obs[k <= 2 ? 0 : k <= 5 ? k - 2 : 4]++;
        }
        std::vector<double> p(5, 0.0);
        for (std::int64_t k = 0; k <= n; ++k) {
            const double pk = choose(n, k) * std::pow(z, double(k)) *
                              std::pow(1.0 - z, double(n - k));
            p[k <= 2 ? 0 : k <= 5 ? k - 2 : 4] += pk;
        }
        CHECK(chi2_stat(obs, p, N) < chi2_crit(4));
    }

    // Conditioned binomial: K >= 2 always, pmf proportional on k >= 2.
    {
        const std::int64_t n = 5;
        const double z = 0.08;
        std::vector<std::int64_t> obs(3, 0); // k = 2, 3, 4+
        const int N = 100000;
        for (int i = 0; i < N; ++i) {
            const std::int64_t k = sample_cond_binomial(n, z, 2, rng);
            REQUIRE(k >= 2);
            obs[std::min<std::int64_t>(k, 4) - 2]++;
        }
        std::vector<double> p(3, 0.0);
        double tail = 0.0;
        for (std::int64_t k = 2; k <= n; ++k) {
            const double pk = choose(n, k) * std::pow(z, double(k)) *
                              std::pow(1.0 - z, double(n - k));
            tail += pk;
            p[std::min<std::int64_t>(k, 4) - 2] += pk;
        }
        for (auto& x : p) x /= tail;
        CHECK(chi2_stat(obs, p, N) < chi2_crit(2 + 1));
    }

    // Hypergeometric urn walk: population 10, 4 marked, draw 5.
    {
        std::vector<std::int64_t> obs(5, 0);
        const int N = 100000;
        for (int i = 0; i < N; ++i)
            obs[sample_hypergeometric(10, 4, 5, rng)]++;
        std::vector<double> p(5);
        for (int k = 0; k <= 4; ++k)
            p[k] = choose(4, k) * choose(6, 5 - k) / choose(10, 5);
        CHECK(chi2_stat(obs, p, N) < chi2_crit(4));
    }
}

TEST_CASE("single Kingman pair: unit exponential wait, one merge") {
    SystemSpec sys = single_site(MeasureSpec::dirac_zero(1.0), {}, 2);
    Simulator sim(sys);
    CounterRng rng(0x516a);
    double sum_t = 0.0;
    const int N = 20000;
    for (int i = 0; i < N; ++i) {
        Configuration state{{2}};
        EventRecord ev = sim.step(state, 0.0, rng);
        REQUIRE(state.counts[0] == 1);
        REQUIRE(ev.kind == ActionKind::Coalescence);
        REQUIRE(!ev.coordinated);
        REQUIRE(ev.participants == 2);
        sum_t += ev.time;
    }
    CHECK(std::fabs(sum_t / N - 1.0) < 4.0 / std::sqrt(double(N)));
}

TEST_CASE("tilted participation sampler matches frozen bin masses") {
    CounterRng rng(0x7117ed);

    // Beta(0.5, 1.5) coalescence at n = 10, w = 2.
    {
        SystemSpec sys =
            single_site(MeasureSpec(0.0, {}, BetaDensity{0.5, 1.5, 1.0}));
        Simulator sim(sys);
        const std::array<double, 6> edges{0.0, 0.1, 0.25, 0.5, 0.75, 1.0};
        const std::vector<double> p{
            0.7154212691865894, 0.19061145603412766, 0.073948593675649861,
            0.016155680640672755, 0.0038630004629603282};
        std::vector<std::int64_t> obs(5, 0);
        const int N = 100000;
        for (int i = 0; i < N; ++i) {
            Configuration state{{10}};
            EventRecord ev = sim.step(state, 0.0, rng);
            REQUIRE(ev.coordinated);
            REQUIRE(ev.participants >= 2);
            for (int b = 0; b < 5; ++b)
                if (ev.z <= edges[b + 1] || b == 4) {
                    obs[b]++;
                    break;
                }
        }
        CHECK(chi2_stat(obs, p, N) < chi2_crit(4));
    }

    // PowerLaw(1, 0.5) death at n = 50, w = 1.
    {
        SystemSpec sys = single_site(
            {}, MeasureSpec(0.0, {}, PowerLawDensity{1.0, 0.5},
                            ActionKind::Death));
        Simulator sim(sys);
        const std::array<double, 6> edges{0.0, 0.01, 0.05, 0.15, 0.4, 1.0};
        const std::vector<double> p{
            0.40017235586138098, 0.30340560632176242, 0.15962837944312729,
            0.086541751093588089, 0.050251907280141217};
        std::vector<std::int64_t> obs(5, 0);
        const int N = 100000;
        for (int i = 0; i < N; ++i) {
            Configuration state{{50}};
            EventRecord ev = sim.step(state, 0.0, rng);
            REQUIRE(ev.coordinated);
            for (int b = 0; b < 5; ++b)
                if (ev.z <= edges[b + 1] || b == 4) {
                    obs[b]++;
                    break;
                }
        }
        CHECK(chi2_stat(obs, p, N) < chi2_crit(4));
    }
}

TEST_CASE("atom versus density selection inside one measure") {
    // Death measure: atom at 0.5 of mass 2 plus constant density 3, n = 4.
    // P(atom event | coordinated) = (1 - 0.5^4) * 2 / 0.5
    //                             / (that + 3 H_4) = 3.75 / 10.
    SystemSpec sys = single_site(
        {}, MeasureSpec(0.0, {{0.5, 2.0}}, ConstantDensity{3.0},
                        ActionKind::Death));
    Simulator sim(sys);
    CounterRng rng(0xa70b);
    const int N = 100000;
    int atom_hits = 0;
    for (int i = 0; i < N; ++i) {
        Configuration state{{4}};
        EventRecord ev = sim.step(state, 0.0, rng);
        if (ev.z == 0.5) ++atom_hits;
    }
    const double p = 0.375;
    CHECK(std::fabs(double(atom_hits) / N - p) <
          4.0 * std::sqrt(p * (1.0 - p) / N));
}

TEST_CASE("one-step loss distribution matches the jump-chain law") {
    const MeasureSpec lambda(0.3, {}, BetaDensity{0.5, 1.5, 1.0});
    const MeasureSpec death(0.0, {}, ConstantDensity{0.4}, ActionKind::Death);
    const std::int64_t n = 30;
    const LossDistribution ld = loss_distribution(lambda, death, n);

    std::vector<double> p(6, 0.0); // losses 1..5 and 6+
    for (std::int64_t k = 1; k <= n; ++k)
        p[std::min<std::int64_t>(k, 6) - 1] += ld.zeta[k - 1];

    SystemSpec sys = single_site(lambda, death);
    Simulator sim(sys);
    CounterRng rng(0x5e7a);
    std::vector<std::int64_t> obs(6, 0);
    const int N = 100000;
    for (int i = 0; i < N; ++i) {
        Configuration state{{n}};
        sim.step(state, 0.0, rng);
        const std::int64_t loss = n - state.counts[0];
        REQUIRE(loss >= 1);
        obs[std::min<std::int64_t>(loss, 6) - 1]++;
    }
    CHECK(chi2_stat(obs, p, N) < chi2_crit(5));
}

TEST_CASE("event classes fire proportionally to their rates") {
    SystemBuilder b({"a", "b"});
    b.coalescence("a", MeasureSpec::dirac_zero(1.0));
    b.death("a", MeasureSpec(0.0, {}, ConstantDensity{0.5}, ActionKind::Death));
    b.migration("a", "b",
                MeasureSpec(0.0, {}, PowerLawDensity{1.0, 0.5},
                            ActionKind::Migration));
    b.reproduction("a", "b", MeasureSpec::dirac_zero(0.3, ActionKind::Reproduction));
    b.coalescence("b", MeasureSpec::dirac_zero(2.0));
    b.death("b", MeasureSpec(0.0, {{0.6, 0.8}}, NoDensity{}, ActionKind::Death));
    SystemSpec sys = b.build();

    const Configuration start{{20, 10}};
    struct Slot {
        ActionKind kind;
        std::size_t from;
        double rate;
    };
    std::vector<Slot> slots{
        {ActionKind::Coalescence, 0,
         total_rate(ActionKind::Coalescence, sys.coalescence(0), 20)},
        {ActionKind::Death, 0, total_rate(ActionKind::Death, sys.death(0), 20)},
        {ActionKind::Migration, 0,
         total_rate(ActionKind::Migration, sys.migration(0, 1), 20)},
        {ActionKind::Reproduction, 0,
         total_rate(ActionKind::Reproduction, sys.reproduction(0, 1), 20)},
        {ActionKind::Coalescence, 1,
         total_rate(ActionKind::Coalescence, sys.coalescence(1), 10)},
        {ActionKind::Death, 1, total_rate(ActionKind::Death, sys.death(1), 10)},
    };
    double total = 0.0;
    for (const auto& s : slots) total += s.rate;
    std::vector<double> p;
    for (const auto& s : slots) p.push_back(s.rate / total);

    Simulator sim(sys);
    CounterRng rng(0xc1a55);
    std::vector<std::int64_t> obs(slots.size(), 0);
    const int N = 100000;
    for (int i = 0; i < N; ++i) {
        Configuration state = start;
        EventRecord ev = sim.step(state, 0.0, rng);
        for (std::size_t s = 0; s < slots.size(); ++s)
            if (slots[s].kind == ev.kind && slots[s].from == ev.site_from) {
                obs[s]++;
                break;
            }
    }
    CHECK(chi2_stat(obs, p, N) < chi2_crit(5));
}

TEST_CASE("pure reproduction is a Yule chain") {
    SystemBuilder b({"u"});
    b.reproduction("u", "u", MeasureSpec::dirac_zero(2.0, ActionKind::Reproduction));
    b.initial("u", InitialCount::finite(1));
    SystemSpec sys = b.build();
    Simulator sim(sys);
    CounterRng rng(0x91e0);
    const int N = 20000;
    std::array<double, 3> gap_sum{};
    for (int i = 0; i < N; ++i) {
        Configuration state{{1}};
        double t = 0.0;
        for (int e = 0; e < 3; ++e) {
            EventRecord ev = sim.step(state, t, rng);
            gap_sum[e] += ev.time - t;
            t = ev.time;
            REQUIRE(state.counts[0] == e + 2);
        }
    }
    for (int e = 0; e < 3; ++e) {
        const double mean = 1.0 / (2.0 * (e + 1));
        CHECK(std::fabs(gap_sum[e] / N - mean) <
              4.0 * mean / std::sqrt(double(N)));
    }
}

TEST_CASE("simulate: mean laws and degenerate systems") {
    // Linear death: E count(t) = n exp(-d t).
    {
        SystemSpec sys = single_site(
            {}, MeasureSpec::dirac_zero(0.7, ActionKind::Death), 200);
        const double t = 1.0;
        const double p = std::exp(-0.7 * t);
        const int N = 4000;
        double sum = 0.0;
        CounterRng base(0xdea7);
        Simulator sim(sys);
        for (int i = 0; i < N; ++i) {
            Trajectory traj = sim.simulate(t, base.derive(i));
            validate_trajectory(traj, sys);
            sum += double(traj.final_state.counts[0]);
        }
        const double se = std::sqrt(200.0 * p * (1.0 - p) / N);
        CHECK(std::fabs(sum / N - 200.0 * p) < 4.0 * se);
    }

    // Yule mean: E total(t) = exp(r t) from one particle.
    {
        SystemBuilder b({"u"});
        b.reproduction("u", "u",
                       MeasureSpec::dirac_zero(1.0, ActionKind::Reproduction));
        b.initial("u", InitialCount::finite(1));
        SystemSpec sys = b.build();
        const double t = 1.5;
        const double mean = std::exp(t);
        const int N = 20000;
        double sum = 0.0;
        CounterRng base(0x91e1);
        Simulator sim(sys);
        for (int i = 0; i < N; ++i)
            sum += double(sim.simulate(t, base.derive(i)).final_state.counts[0]);
        const double se = std::sqrt(mean * (mean - 1.0) / N);
        CHECK(std::fabs(sum / N - mean) < 4.0 * se);
    }

    // Zero-measure system: nothing ever happens.
    {
        SystemSpec sys = single_site({}, {}, 12);
        Trajectory traj = simulate(sys, 3.0, CounterRng(1));
        CHECK(traj.events.empty());
        CHECK(traj.final_state.counts[0] == 12);
        CHECK(traj.terminal_time == 3.0);
    }
}

TEST_CASE("simultaneous wipeout from an atom at one") {
    SystemSpec sys = single_site(
        {}, MeasureSpec(0.0, {{1.0, 0.5}}, NoDensity{}, ActionKind::Death), 7);
    Simulator sim(sys);
    Configuration state{{7}};
    CounterRng rng(3);
    EventRecord ev = sim.step(state, 0.0, rng);
    CHECK(ev.z == 1.0);
    CHECK(ev.participants == 7);
    CHECK(state.counts[0] == 0);
    CHECK_THROWS_AS(sim.step(state, ev.time, rng), Absorbed);
}

TEST_CASE("budget, absorption, and preconditions") {
    SystemSpec sys = single_site(MeasureSpec::dirac_zero(1.0), {}, 100);
    SimOptions opts;
    opts.max_events = 5;
    Simulator sim(sys, opts);
    try {
        sim.simulate(100.0, CounterRng(9));
        REQUIRE(false);
    } catch (const EventBudgetExceeded& e) {
        CHECK(e.partial().events.size() == 5);
        CHECK(e.partial().final_state.counts[0] == 95);
    }

    Simulator plain(sys);
    Configuration absorbed{{1}};
    CounterRng rng(4);
    CHECK_THROWS_AS(plain.step(absorbed, 0.0, rng), Absorbed);
    CHECK_THROWS_AS(plain.simulate(0.0, CounterRng(5)), PreconditionViolated);
    CHECK_THROWS_AS(Simulator(sys, SimOptions{0, 10}), PreconditionViolated);
}

TEST_CASE("replay determinism") {
    SystemBuilder b({"a", "b"});
    b.coalescence("a", MeasureSpec(0.1, {}, BetaDensity{0.5, 1.5, 1.0}));
    b.migration("a", "b",
                MeasureSpec(0.2, {{0.3, 0.4}}, NoDensity{},
                            ActionKind::Migration));
    b.death("b", MeasureSpec(0.0, {}, ConstantDensity{0.5}, ActionKind::Death));
    b.initial("a", InitialCount::finite(40));
    b.initial("b", InitialCount::finite(5));
    SystemSpec sys = b.build();

    Trajectory t1 = simulate(sys, 2.0, CounterRng(77).derive(3));
    Trajectory t2 = simulate(sys, 2.0, CounterRng(77).derive(3));
    REQUIRE(t1.events.size() == t2.events.size());
    for (std::size_t i = 0; i < t1.events.size(); ++i) {
        CHECK(t1.events[i].time == t2.events[i].time);
        CHECK(t1.events[i].z == t2.events[i].z);
        CHECK(t1.events[i].participants == t2.events[i].participants);
        CHECK(t1.events[i].kind == t2.events[i].kind);
    }
    CHECK(t1.final_state == t2.final_state);
    CHECK(t1.stream_id == t2.stream_id);

    Trajectory t3 = simulate(sys, 2.0, CounterRng(77).derive(4));
    const bool differs = t3.events.size() != t1.events.size() ||
                         (t3.events.size() > 0 && t1.events.size() > 0 &&
                          t3.events[0].time != t1.events[0].time);
    CHECK(differs);
    validate_trajectory(t1, sys);
    validate_trajectory(t3, sys);
}

TEST_CASE("coupled runs: degenerate and smallest cases") {
    SystemSpec sys = single_site(MeasureSpec::dirac_zero(1.0));
    Simulator sim(sys);

    auto [e1, e2] =
        sim.simulate_coupled(Configuration{{9}}, Configuration{{9}}, 1.5,
                             CounterRng(21));
    REQUIRE(e1.events.size() == e2.events.size());
    for (std::size_t i = 0; i < e1.events.size(); ++i) {
        CHECK(e1.events[i].time == e2.events[i].time);
        CHECK(e1.events[i].participants == e2.events[i].participants);
    }
    CHECK(e1.final_state == e2.final_state);

    SystemBuilder b({"a", "b"});
    b.coalescence("a", MeasureSpec::dirac_zero(1.0));
    SystemSpec two = b.build();
    Simulator sim2(two);
    for (int rep = 0; rep < 50; ++rep) {
        auto [s1, s2] = sim2.simulate_coupled(Configuration{{1, 0}},
                                              Configuration{{2, 0}}, 4.0,
                                              CounterRng(100).derive(rep));
        CHECK(dominated_by(s1.final_state, s2.final_state));
        CHECK(s1.events.empty());
    }

    CHECK_THROWS_AS(sim.simulate_coupled(Configuration{{5}},
                                         Configuration{{4}}, 1.0,
                                         CounterRng(2)),
                    PreconditionViolated);
}

TEST_CASE("coupled randomized corpus holds domination everywhere") {
    CounterRng meta(0xc0e1);
    int coordinated_events = 0;
    for (int trial = 0; trial < 250; ++trial) {
        const std::size_t V = 1 + meta.next_below(3);
        std::vector<std::string> names;
        for (std::size_t v = 0; v < V; ++v)
            names.push_back("s" + std::to_string(v));
        SystemBuilder b(names);
        for (std::size_t v = 0; v < V; ++v) {
            if (meta.next_below(10) < 7)
                b.coalescence(names[v], random_measure(meta, true));
            if (meta.next_below(10) < 5)
                b.death(names[v], random_measure(meta, true));
        }
        for (std::size_t u = 0; u < V; ++u)
            for (std::size_t v = 0; v < V; ++v) {
                if (u != v && meta.next_below(10) < 4)
                    b.migration(names[u], names[v], random_measure(meta, true));
                if (meta.next_below(10) < 3)
                    b.reproduction(names[u], names[v],
                                   random_measure(meta, true));
            }
        SystemSpec sys = b.build();

        Configuration pi1, pi2;
        for (std::size_t v = 0; v < V; ++v) {
            const std::int64_t hi = meta.next_below(51);
            pi2.counts.push_back(hi);
            pi1.counts.push_back(
                static_cast<std::int64_t>(meta.next_below(hi + 1)));
        }
        Simulator sim(sys);
        auto [t1, t2] = sim.simulate_coupled(pi1, pi2, 0.3,
                                             CounterRng(0xfeed).derive(trial));
        CHECK(dominated_by(t1.final_state, t2.final_state));
        CHECK(t1.events.size() <= t2.events.size());
        validate_trajectory(t1, sys);
        validate_trajectory(t2, sys);
        for (const auto& ev : t2.events) coordinated_events += ev.coordinated;
    }
    CHECK(coordinated_events > 100);
}

TEST_CASE("truncation level is monotone under coupling") {
    SystemSpec sys = single_site(MeasureSpec(0.0, {}, BetaDensity{0.5, 1.5, 1.0}));
    Simulator sim(sys);
    auto [lo, hi] = sim.simulate_coupled(Configuration{{100}},
                                         Configuration{{400}}, 2.0,
                                         CounterRng(0x70c2));
    CHECK(dominated_by(lo.final_state, hi.final_state));
    CHECK(lo.final_state.counts[0] >= 1);
}

TEST_CASE("staggered entries") {
    const MeasureSpec kingman = MeasureSpec::dirac_zero(1.0);

    CHECK(simulate_with_entries(kingman, {}, EntrySchedule{}, 1.0,
                                CounterRng(6)) == 0);
    CHECK_THROWS_AS(simulate_with_entries(kingman, {},
                                          EntrySchedule{{0.2, 0.1}}, 1.0,
                                          CounterRng(6)),
                    PreconditionViolated);
    CHECK_THROWS_AS(simulate_with_entries(kingman, {}, EntrySchedule{{2.0}},
                                          1.0, CounterRng(6)),
                    PreconditionViolated);

    // All entries at zero reproduce the plain run's distribution.
    {
        const int N = 4000;
        const double t0 = 1.0;
        EntrySchedule at_zero;
        at_zero.times.assign(30, 0.0);
        SystemSpec plain_sys = single_site(kingman, {}, 30);
        Simulator plain(plain_sys);
        double s_e = 0.0, s2_e = 0.0, s_p = 0.0, s2_p = 0.0;
        CounterRng base(0xe27);
        for (int i = 0; i < N; ++i) {
            const double a = double(simulate_with_entries(
                kingman, {}, at_zero, t0, base.derive(2 * i)));
            const double b =
                double(plain.simulate(t0, base.derive(2 * i + 1))
                           .final_state.counts[0]);
            s_e += a;
            s2_e += a * a;
            s_p += b;
            s2_p += b * b;
        }
        const double var =
            (s2_e - s_e * s_e / N + s2_p - s_p * s_p / N) / (N - 1.0) / N;
        CHECK(std::fabs(s_e / N - s_p / N) < 4.0 * std::sqrt(var));
    }

    // Staggered entries can only slow coalescence: the staggered mean
    // dominates the all-at-zero mean.
    {
        const int N = 10000;
        const double t0 = 1.0;
        EntrySchedule spread;
        for (int i = 0; i < 30; ++i)
            spread.times.push_back(0.5 * double(i) / 29.0);
        EntrySchedule at_zero;
        at_zero.times.assign(30, 0.0);
        double s_spread = 0.0, s_zero = 0.0, s2_spread = 0.0, s2_zero = 0.0;
        CounterRng base(0x5a67);
        for (int i = 0; i < N; ++i) {
            const double a = double(simulate_with_entries(
                kingman, {}, spread, t0, base.derive(2 * i)));
            const double b = double(simulate_with_entries(
                kingman, {}, at_zero, t0, base.derive(2 * i + 1)));
            s_spread += a;
            s2_spread += a * a;
            s_zero += b;
            s2_zero += b * b;
        }
        const double var = (s2_spread - s_spread * s_spread / N + s2_zero -
                            s_zero * s_zero / N) /
                           (N - 1.0) / N;
        const double gap = s_spread / N - s_zero / N;
        CHECK(gap > 4.0 * std::sqrt(var));
    }
}
