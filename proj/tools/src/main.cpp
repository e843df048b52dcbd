#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "coordsim/bounds.hpp"
#include "coordsim/config.hpp"
#include "coordsim/criteria.hpp"
#include "coordsim/errors.hpp"
#include "coordsim/experiments.hpp"
#include "coordsim/graph.hpp"
#include "coordsim/measure.hpp"
#include "coordsim/rates.hpp"
#include "coordsim/rng.hpp"
#include "coordsim/sim.hpp"
#include "json.hpp"

#ifndef COORDSIM_VERSION
#define COORDSIM_VERSION "0.0.0"
#endif

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace coordsim;
using Clock = std::chrono::steady_clock;

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

const char* kind_name(ActionKind k) {
    switch (k) {
        case ActionKind::Coalescence: return "coalescence";
        case ActionKind::Death: return "death";
        case ActionKind::Migration: return "migration";
        case ActionKind::Reproduction: return "reproduction";
    }
    return "?";
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (const unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string read_bytes(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw SchemaError("cannot read " + file.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text(const fs::path& file, const std::string& text) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw SchemaError("cannot write " + file.string());
    out << text;
}

// Flags the spec shares across subcommands; each runner reads the ones it
// understands and records the effective values in the manifest.
struct Global {
    std::uint64_t seed = 0;
    std::int64_t reps = 0;
    std::string out;
    std::int64_t trunc = 2000;
    int threads = 1;
};

// Everything needed to replay a run: written next to the result file.
struct RunContext {
    std::string subcommand;
    fs::path config;
    const Global* g = nullptr;
    json flags = json::object();
    std::optional<std::int64_t> events;
    Clock::time_point start = Clock::now();

    // Emits the primary result.  Stdout when no --out was given; the
    // manifest is only written alongside an actual file.
    void deliver(const std::string& body) const {
        if (g->out.empty()) {
            std::cout << body;
            return;
        }
        write_text(g->out, body);
        char hash[32];
        std::snprintf(hash, sizeof hash, "0x%016llx",
                      static_cast<unsigned long long>(
                          fnv1a64(read_bytes(config))));
        json m;
        m["subcommand"] = subcommand;
        m["config"] = config.string();
        m["config_hash"] = hash;
        m["seed"] = g->seed;
        m["flags"] = flags;
        m["version"] = COORDSIM_VERSION;
        m["wall_seconds"] =
            std::chrono::duration<double>(Clock::now() - start).count();
        if (events)
            m["events"] = *events;
        else
            m["events"] = nullptr;
        write_text(g->out + ".manifest.json", m.dump(2) + "\n");
    }

    void summary(const json& s) const {
        if (g->out.empty()) return;
        write_text(g->out + ".summary.json", s.dump(2) + "\n");
    }
};

json verdict_json(const Verdict& v) {
    json j;
    j["outcome"] = to_string(v.outcome);
    j["shortcut"] = v.shortcut;
    if (std::isfinite(v.series_sum)) j["series_sum"] = v.series_sum;
    if (std::isfinite(v.exponent)) j["exponent"] = v.exponent;
    return j;
}

McOptions make_mc(const Global& g) {
    McOptions mc;
    mc.reps = g.reps;
    mc.seed = g.seed;
    mc.threads = g.threads;
    mc.sim.n_trunc = g.trunc;
    return mc;
}

void require_sites(const SystemSpec& sys, std::size_t want,
                   const std::string& who) {
    if (sys.size() != want)
        throw PreconditionViolated(who + ": expected " +
                                   std::to_string(want) + "-site system, got " +
                                   std::to_string(sys.size()));
}

void append_event_row(std::ostringstream& csv, const SystemSpec& sys,
                      std::vector<std::int64_t>& counts,
                      const EventRecord& ev) {
    for (const auto& [site, count] : ev.after) counts[site] = count;
    csv << ',' << fmt(ev.time) << ',' << kind_name(ev.kind) << ','
        << sys.name(ev.site_from) << ',' << sys.name(ev.site_to) << ','
        << fmt(ev.z) << ',' << ev.participants;
    for (const std::int64_t c : counts) csv << ',' << c;
    csv << '\n';
}

int run_rates(RunContext& ctx, const Global& g, const fs::path& measure_file,
              const std::string& kind_str, std::int64_t b) {
    const ActionKind kind = kind_str == "coal" ? ActionKind::Coalescence
                            : kind_str == "death" ? ActionKind::Death
                            : kind_str == "migration" ? ActionKind::Migration
                                                      : ActionKind::Reproduction;
    const MeasureSpec m = parse_measure(measure_file);
    ctx.flags = {{"measure", measure_file.string()},
                 {"kind", kind_str},
                 {"b", b}};

    std::ostringstream csv;
    csv << "k,rate\n";
    for (std::int64_t k = weight_of(kind); k <= b; ++k)
        csv << k << ',' << fmt(block_rate(kind, m, b, k)) << '\n';
    csv << "total," << fmt(total_rate(kind, m, b)) << '\n';
    ctx.deliver(csv.str());
    return 0;
}

int run_criteria(RunContext& ctx, const Global& g, const fs::path& system_file) {
    const SystemSpec sys = parse_system(system_file);
    const InteractionGraph graph = build_interaction_graph(sys);
    const StaysInfiniteReport report = stays_infinite(sys);
    ctx.flags = {{"system", system_file.string()}};

    std::int64_t inconclusive = 0;
    std::int64_t decided = 0;
    const auto tally = [&](Outcome o) {
        (o == Outcome::Inconclusive ? inconclusive : decided) += 1;
    };

    json doc;
    doc["sites"] = json::array();
    for (std::size_t v = 0; v < sys.size(); ++v) {
        tally(graph.site_cdi[v].outcome);
        doc["sites"].push_back({{"name", sys.name(v)},
                                {"comes_down", verdict_json(graph.site_cdi[v])}});
    }
    doc["edges"] = json::array();
    for (const auto& [u, v] : graph.edges)
        doc["edges"].push_back({sys.name(u), sys.name(v)});
    doc["strengths"] = json::array();
    for (const DirectedStrength& s : graph.strengths) {
        tally(s.verdict.outcome);
        json row = verdict_json(s.verdict);
        row["from"] = sys.name(s.from);
        row["to"] = sys.name(s.to);
        doc["strengths"].push_back(std::move(row));
    }
    tally(report.outcome);
    doc["stays_infinite"] = {{"outcome", to_string(report.outcome)},
                             {"witness", report.witness},
                             {"explanation", report.explanation}};

    ctx.deliver(doc.dump(2) + "\n");
    // A report that mostly shrugs is flagged distinctly from hard errors.
    return inconclusive > decided ? 2 : 0;
}

int run_simulate(RunContext& ctx, const Global& g, const fs::path& system_file,
                 double t) {
    const SystemSpec sys = parse_system(system_file);
    SimOptions opts;
    opts.n_trunc = g.trunc;
    Simulator sim(sys, opts);
    const std::int64_t reps = g.reps > 0 ? g.reps : 1;
    const CounterRng root(g.seed);
    ctx.flags = {{"system", system_file.string()},
                 {"t", t},
                 {"trunc", g.trunc},
                 {"reps", reps},
                 {"seed", g.seed}};

    std::ostringstream csv;
    csv << "rep,time,class,site_from,site_to,z,K";
    for (const std::string& name : sys.names()) csv << ',' << name;
    csv << '\n';

    std::int64_t events = 0;
    for (std::int64_t rep = 0; rep < reps; ++rep) {
        const Trajectory tr = sim.simulate(t, root.derive(rep));
        std::vector<std::int64_t> counts = tr.initial.counts;
        for (const EventRecord& ev : tr.events) {
            csv << rep;
            append_event_row(csv, sys, counts, ev);
        }
        events += static_cast<std::int64_t>(tr.events.size());
    }
    ctx.events = events;
    ctx.deliver(csv.str());
    return 0;
}

int run_couple(RunContext& ctx, const Global& g, const fs::path& system_file,
               std::int64_t n1, std::int64_t n2, double t) {
    if (n1 > n2)
        throw PreconditionViolated("couple: --n1 must not exceed --n2");
    const SystemSpec sys = parse_system(system_file);
    Simulator sim(sys);
    const std::int64_t reps = g.reps > 0 ? g.reps : 1;
    const CounterRng root(g.seed);
    ctx.flags = {{"system", system_file.string()},
                 {"n1", n1},
                 {"n2", n2},
                 {"t", t},
                 {"reps", reps},
                 {"seed", g.seed}};

    Configuration pi1, pi2;
    for (std::size_t v = 0; v < sys.size(); ++v) {
        const InitialCount& c = sys.initial(v);
        pi1.counts.push_back(c.is_infinite ? n1 : std::min(c.count, n1));
        pi2.counts.push_back(c.is_infinite ? n2 : std::min(c.count, n2));
    }

    std::ostringstream csv;
    csv << "rep,run,time,class,site_from,site_to,z,K";
    for (const std::string& name : sys.names()) csv << ',' << name;
    csv << '\n';

    std::int64_t events = 0;
    std::int64_t violations = 0;
    for (std::int64_t rep = 0; rep < reps; ++rep) {
        try {
            const auto [lo, hi] = sim.simulate_coupled(pi1, pi2, t,
                                                       root.derive(rep));
            const Trajectory* runs[2] = {&lo, &hi};
            for (int which = 0; which < 2; ++which) {
                std::vector<std::int64_t> counts = runs[which]->initial.counts;
                for (const EventRecord& ev : runs[which]->events) {
                    csv << rep << ',' << which + 1;
                    append_event_row(csv, sys, counts, ev);
                }
                events += static_cast<std::int64_t>(runs[which]->events.size());
            }
        } catch (const OrderingViolation&) {
            ++violations;
        }
    }
    ctx.events = events;
    ctx.deliver(csv.str());
    ctx.summary({{"reps", reps},
                 {"ordering_violations", violations},
                 {"seed", g.seed}});
    if (violations > 0) {
        std::cerr << "couple: " << violations << " ordering violation(s) in "
                  << reps << " replicate pairs\n";
        return 1;
    }
    return 0;
}

int run_hitprob(RunContext& ctx, const Global& g, const fs::path& system_file,
                std::int64_t n, std::int64_t level, std::int64_t width,
                std::int64_t level_hi) {
    const SystemSpec sys = parse_system(system_file);
    require_sites(sys, 1, "hitprob");
    const McOptions mc = make_mc(g);

    std::vector<Estimate> rows;
    std::vector<std::int64_t> levels;
    if (level_hi > 0) {
        rows = hit_level_profile(sys.coalescence(0), sys.death(0), n, level,
                                 level_hi, mc);
        for (std::int64_t k = level; k <= level_hi; ++k) levels.push_back(k);
        width = 0;
    } else {
        rows.push_back(estimate_hit_prob(sys.coalescence(0), sys.death(0), n,
                                         HitTarget{level, width}, mc));
        levels.push_back(level);
    }
    ctx.flags = {{"system", system_file.string()}, {"n", n},
                 {"level", level},                 {"width", width},
                 {"level_hi", level_hi},           {"reps", rows[0].reps},
                 {"seed", g.seed},                 {"threads", g.threads}};

    std::ostringstream csv;
    csv << "level,width,estimate,ci_lo,ci_hi,reps,seed\n";
    json points = json::array();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const Estimate& e = rows[i];
        csv << levels[i] << ',' << width << ',' << fmt(e.value) << ','
            << fmt(e.ci_lo) << ',' << fmt(e.ci_hi) << ',' << e.reps << ','
            << e.seed << '\n';
        points.push_back({{"level", levels[i]},
                          {"estimate", e.value},
                          {"ci_lo", e.ci_lo},
                          {"ci_hi", e.ci_hi}});
    }
    ctx.deliver(csv.str());
    ctx.summary({{"n", n},
                 {"reps", rows[0].reps},
                 {"seed", g.seed},
                 {"levels", std::move(points)}});
    return 0;
}

int run_migration(RunContext& ctx, const Global& g, const fs::path& system_file,
                  double t, std::int64_t n, std::vector<std::int64_t> sweep) {
    const SystemSpec sys = parse_system(system_file);
    const McOptions mc = make_mc(g);

    if (n > 0) {
        const Estimate e = estimate_migration_count(sys, n, t, mc);
        ctx.flags = {{"system", system_file.string()}, {"t", t},   {"n", n},
                     {"reps", e.reps},                 {"seed", g.seed},
                     {"threads", g.threads},           {"trunc", g.trunc}};
        std::ostringstream csv;
        csv << "n,mean,ci_lo,ci_hi\n"
            << n << ',' << fmt(e.value) << ',' << fmt(e.ci_lo) << ','
            << fmt(e.ci_hi) << '\n';
        ctx.deliver(csv.str());
        ctx.summary({{"t", t},
                     {"n", n},
                     {"mean", e.value},
                     {"ci_lo", e.ci_lo},
                     {"ci_hi", e.ci_hi},
                     {"reps", e.reps},
                     {"seed", g.seed}});
        return 0;
    }

    if (sweep.empty()) sweep = {250, 500, 1000, 2000, 4000};
    const GrowthTable table = migration_growth(sys, sweep, t, mc);
    ctx.flags = {{"system", system_file.string()},
                 {"t", t},
                 {"sweep", sweep},
                 {"reps", table.rows[0].mean_count.reps},
                 {"seed", g.seed},
                 {"threads", g.threads},
                 {"trunc", g.trunc}};

    std::ostringstream csv;
    csv << "n,median,mean,ci_lo,ci_hi\n";
    for (const GrowthRow& row : table.rows)
        csv << row.n_start << ',' << fmt(row.median_count) << ','
            << fmt(row.mean_count.value) << ',' << fmt(row.mean_count.ci_lo)
            << ',' << fmt(row.mean_count.ci_hi) << '\n';
    ctx.deliver(csv.str());
    ctx.summary({{"t", t},
                 {"slope", table.slope},
                 {"threshold", table.threshold},
                 {"growing", table.growing},
                 {"reps", table.rows[0].mean_count.reps},
                 {"seed", g.seed}});
    return 0;
}

int run_speed(RunContext& ctx, const Global& g, const fs::path& system_file,
              std::int64_t n, const std::vector<double>& ts) {
    const SystemSpec sys = parse_system(system_file);
    require_sites(sys, 1, "speed");
    if (!sys.death(0).is_zero())
        throw PreconditionViolated("speed: the site must have no death measure");
    const McOptions mc = make_mc(g);
    const auto pts = estimate_block_speed(sys.coalescence(0), n, ts, mc);
    ctx.flags = {{"system", system_file.string()},
                 {"n", n},
                 {"times", ts},
                 {"reps", g.reps},
                 {"seed", g.seed},
                 {"threads", g.threads}};

    std::ostringstream csv;
    csv << "t,mean_blocks,se,normalized\n";
    json points = json::array();
    for (const SpeedPoint& p : pts) {
        csv << fmt(p.t) << ',' << fmt(p.mean_blocks) << ',' << fmt(p.se) << ','
            << fmt(p.normalized) << '\n';
        points.push_back({{"t", p.t},
                          {"mean_blocks", p.mean_blocks},
                          {"se", p.se},
                          {"normalized", p.normalized}});
    }
    ctx.deliver(csv.str());
    ctx.summary({{"n", n}, {"seed", g.seed}, {"points", std::move(points)}});
    return 0;
}

int run_meantotal(RunContext& ctx, const Global& g, const fs::path& system_file,
                  std::int64_t n, const std::vector<double>& ts) {
    const SystemSpec sys = parse_system(system_file);
    const McOptions mc = make_mc(g);
    const auto pts = estimate_mean_total(sys, n, ts, mc);
    ctx.flags = {{"system", system_file.string()},
                 {"n", n},
                 {"times", ts},
                 {"reps", g.reps},
                 {"seed", g.seed},
                 {"threads", g.threads}};

    std::ostringstream csv;
    csv << "t,mean_total,se\n";
    json points = json::array();
    for (const MeanPoint& p : pts) {
        csv << fmt(p.t) << ',' << fmt(p.mean_total) << ',' << fmt(p.se) << '\n';
        points.push_back(
            {{"t", p.t}, {"mean_total", p.mean_total}, {"se", p.se}});
    }
    ctx.deliver(csv.str());
    ctx.summary({{"n", n}, {"seed", g.seed}, {"points", std::move(points)}});
    return 0;
}

int run_zeta(RunContext& ctx, const Global& g, const fs::path& system_file,
             std::int64_t n, std::int64_t samples, std::int64_t exact_k) {
    const SystemSpec sys = parse_system(system_file);
    require_sites(sys, 1, "zeta");
    McOptions mc = make_mc(g);
    const LossDistribution emp =
        zeta_empirical(sys.coalescence(0), sys.death(0), n, samples, mc);
    ctx.flags = {{"system", system_file.string()},
                 {"n", n},
                 {"samples", samples},
                 {"exact_k", exact_k},
                 {"seed", g.seed},
                 {"threads", g.threads}};

    std::ostringstream csv;
    csv << "k,empirical,exact\n";
    for (std::int64_t k = 1; k < n; ++k) {
        csv << k << ',' << fmt(emp.zeta[k - 1]) << ',';
        if (k <= exact_k)
            csv << fmt(zeta(sys.coalescence(0), sys.death(0), n, k));
        csv << '\n';
    }
    ctx.events = samples;
    ctx.deliver(csv.str());
    ctx.summary({{"n", n},
                 {"samples", samples},
                 {"deficit", emp.deficit},
                 {"seed", g.seed}});
    return 0;
}

int run_bound(RunContext& ctx, const Global& g, const fs::path& system_file,
              std::int64_t n, double t, double dt) {
    const SystemSpec sys = parse_system(system_file);
    std::vector<MeasureSpec> coals;
    for (std::size_t v = 0; v < sys.size(); ++v)
        coals.push_back(sys.coalescence(v));
    const WnCurve curve = solve_wn(coals, n, t, dt);
    ctx.flags = {{"system", system_file.string()},
                 {"n", n},
                 {"t", t},
                 {"dt", dt}};

    std::ostringstream csv;
    csv << "t,w,omega\n";
    for (const WnPoint& p : curve.points)
        csv << fmt(p.t) << ',' << fmt(p.w) << ',' << fmt(p.omega) << '\n';
    ctx.deliver(csv.str());
    ctx.summary({{"n", n}, {"t", t}, {"dt", dt}, {"clipped", curve.clipped}});
    return 0;
}

int run_trunc_sweep(RunContext& ctx, const Global& g,
                    const fs::path& system_file, double t,
                    std::vector<std::int64_t> truncs) {
    const SystemSpec sys = parse_system(system_file);
    bool any_infinite = false;
    for (std::size_t v = 0; v < sys.size(); ++v)
        any_infinite = any_infinite || sys.initial(v).is_infinite;
    if (!any_infinite)
        throw PreconditionViolated(
            "trunc-sweep: the system has no infinite initial count to truncate");
    if (truncs.empty()) truncs = {250, 500, 1000, 2000, 4000};
    const std::int64_t reps = g.reps > 0 ? g.reps : 100;
    const CounterRng root(g.seed);
    ctx.flags = {{"system", system_file.string()},
                 {"t", t},
                 {"truncs", truncs},
                 {"reps", reps},
                 {"seed", g.seed}};

    std::ostringstream csv;
    csv << "n_trunc,mean_total,se\n";
    std::int64_t events = 0;
    json rows = json::array();
    for (const std::int64_t trunc : truncs) {
        if (trunc < 1)
            throw PreconditionViolated("trunc-sweep: truncations must be >= 1");
        SimOptions opts;
        opts.n_trunc = trunc;
        Simulator sim(sys, opts);
        double sum = 0.0;
        double sumsq = 0.0;
        // The same derived streams drive every truncation level, so the
        // column differences are the truncation effect alone.
        for (std::int64_t rep = 0; rep < reps; ++rep) {
            const Trajectory tr = sim.simulate(t, root.derive(rep));
            const double total = static_cast<double>(tr.final_state.total());
            sum += total;
            sumsq += total * total;
            events += static_cast<std::int64_t>(tr.events.size());
        }
        const double mean = sum / static_cast<double>(reps);
        const double var =
            reps > 1 ? std::max(0.0, (sumsq - sum * mean) /
                                         static_cast<double>(reps - 1))
                     : 0.0;
        const double se = std::sqrt(var / static_cast<double>(reps));
        csv << trunc << ',' << fmt(mean) << ',' << fmt(se) << '\n';
        rows.push_back({{"n_trunc", trunc}, {"mean_total", mean}, {"se", se}});
    }
    ctx.events = events;
    ctx.deliver(csv.str());
    ctx.summary({{"t", t},
                 {"reps", reps},
                 {"seed", g.seed},
                 {"rows", std::move(rows)}});
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"coordinated multi-site particle system toolkit"};
    app.set_version_flag("--version", COORDSIM_VERSION);
    app.require_subcommand(1);
    app.fallthrough();

    Global g;
    app.add_option("--seed", g.seed, "root RNG seed")->capture_default_str();
    app.add_option("--reps", g.reps,
                   "Monte Carlo replicates (0 = operation default)")
        ->capture_default_str();
    app.add_option("--out", g.out,
                   "result file (stdout when omitted; manifest written "
                   "alongside)");
    app.add_option("--trunc", g.trunc, "truncation for infinite initials")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app.add_option("--threads", g.threads, "worker threads for replicates")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();

    int rc = 0;
    RunContext ctx;
    ctx.g = &g;
    const auto arm = [&](CLI::App* sub, const fs::path* config, auto runner) {
        sub->callback([&, sub, config, runner] {
            ctx.subcommand = sub->get_name();
            ctx.config = *config;
            ctx.start = Clock::now();
            rc = runner();
        });
    };

    // rates
    static fs::path rates_measure;
    static std::string rates_kind = "coal";
    static std::int64_t rates_b = 50;
    auto* rates_cmd =
        app.add_subcommand("rates", "block and total rates of one measure");
    rates_cmd->add_option("--measure", rates_measure, "measure file")
        ->required()
        ->check(CLI::ExistingFile);
    rates_cmd->add_option("--kind", rates_kind, "action channel")
        ->check(CLI::IsMember({"coal", "death", "migration", "reproduction"}))
        ->capture_default_str();
    rates_cmd->add_option("--b", rates_b, "block count")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    arm(rates_cmd, &rates_measure,
        [&] { return run_rates(ctx, g, rates_measure, rates_kind, rates_b); });

    // criteria
    static fs::path criteria_system;
    auto* criteria_cmd = app.add_subcommand(
        "criteria", "classifier report: per-site descent, interaction edges, "
                    "directed strengths, escape verdict");
    criteria_cmd->add_option("--system", criteria_system, "system file")
        ->required()
        ->check(CLI::ExistingFile);
    arm(criteria_cmd, &criteria_system,
        [&] { return run_criteria(ctx, g, criteria_system); });

    // simulate
    static fs::path sim_system;
    static double sim_t = 1.0;
    auto* sim_cmd =
        app.add_subcommand("simulate", "event-level trajectories as CSV");
    sim_cmd->add_option("--system", sim_system, "system file")
        ->required()
        ->check(CLI::ExistingFile);
    sim_cmd->add_option("--t", sim_t, "horizon")->capture_default_str();
    arm(sim_cmd, &sim_system, [&] { return run_simulate(ctx, g, sim_system, sim_t); });

    // couple
    static fs::path couple_system;
    static std::int64_t couple_n1 = 0;
    static std::int64_t couple_n2 = 0;
    static double couple_t = 1.0;
    auto* couple_cmd = app.add_subcommand(
        "couple", "dominated pair of runs driven by one event stream");
    couple_cmd->add_option("--system", couple_system, "system file")
        ->required()
        ->check(CLI::ExistingFile);
    couple_cmd->add_option("--n1", couple_n1, "smaller truncation")
        ->required()
        ->check(CLI::PositiveNumber);
    couple_cmd->add_option("--n2", couple_n2, "larger truncation")
        ->required()
        ->check(CLI::PositiveNumber);
    couple_cmd->add_option("--t", couple_t, "horizon")->capture_default_str();
    arm(couple_cmd, &couple_system, [&] {
        return run_couple(ctx, g, couple_system, couple_n1, couple_n2, couple_t);
    });

    // hitprob
    static fs::path hit_system;
    static std::int64_t hit_n = 0;
    static std::int64_t hit_level = 0;
    static std::int64_t hit_width = 0;
    static std::int64_t hit_level_hi = 0;
    auto* hit_cmd = app.add_subcommand(
        "hitprob", "jump-chain level visit probabilities with Wilson CIs");
    hit_cmd->add_option("--system", hit_system, "single-site system file")
        ->required()
        ->check(CLI::ExistingFile);
    hit_cmd->add_option("--n", hit_n, "starting count")
        ->required()
        ->check(CLI::PositiveNumber);
    hit_cmd->add_option("--level", hit_level, "target level (band bottom)")
        ->required()
        ->check(CLI::PositiveNumber);
    hit_cmd->add_option("--width", hit_width, "band width above the level")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    hit_cmd->add_option("--level-hi", hit_level_hi,
                        "profile every level in [--level, --level-hi]")
        ->check(CLI::PositiveNumber);
    arm(hit_cmd, &hit_system, [&] {
        return run_hitprob(ctx, g, hit_system, hit_n, hit_level, hit_width,
                           hit_level_hi);
    });

    // migration
    static fs::path mig_system;
    static double mig_t = 0.5;
    static std::int64_t mig_n = 0;
    static std::vector<std::int64_t> mig_sweep;
    auto* mig_cmd = app.add_subcommand(
        "migration", "migrated-particle counts and the growth statistic");
    mig_cmd->add_option("--system", mig_system, "two-site system file")
        ->required()
        ->check(CLI::ExistingFile);
    mig_cmd->add_option("--t", mig_t, "horizon")->capture_default_str();
    auto* mig_n_opt = mig_cmd->add_option("--n", mig_n, "single source size")
                          ->check(CLI::PositiveNumber);
    mig_cmd
        ->add_option("--sweep", mig_sweep,
                     "source sizes for the growth table (default "
                     "250,500,1000,2000,4000)")
        ->delimiter(',')
        ->excludes(mig_n_opt);
    arm(mig_cmd, &mig_system, [&] {
        return run_migration(ctx, g, mig_system, mig_t, mig_n, mig_sweep);
    });

    // speed
    static fs::path speed_system;
    static std::int64_t speed_n = 0;
    static std::vector<double> speed_ts;
    auto* speed_cmd = app.add_subcommand(
        "speed", "mean block counts on a time grid with the small-t "
                 "normalization");
    speed_cmd->add_option("--system", speed_system, "single-site system file")
        ->required()
        ->check(CLI::ExistingFile);
    speed_cmd->add_option("--n", speed_n, "starting count")
        ->required()
        ->check(CLI::PositiveNumber);
    speed_cmd->add_option("--times", speed_ts, "strictly increasing times")
        ->required()
        ->delimiter(',');
    arm(speed_cmd, &speed_system,
        [&] { return run_speed(ctx, g, speed_system, speed_n, speed_ts); });

    // meantotal
    static fs::path mean_system;
    static std::int64_t mean_n = 0;
    static std::vector<double> mean_ts;
    auto* mean_cmd = app.add_subcommand(
        "meantotal", "mean total count across sites on a time grid");
    mean_cmd->add_option("--system", mean_system, "system file")
        ->required()
        ->check(CLI::ExistingFile);
    mean_cmd->add_option("--n", mean_n, "particles per site at time zero")
        ->required()
        ->check(CLI::PositiveNumber);
    mean_cmd->add_option("--times", mean_ts, "strictly increasing times")
        ->required()
        ->delimiter(',');
    arm(mean_cmd, &mean_system,
        [&] { return run_meantotal(ctx, g, mean_system, mean_n, mean_ts); });

    // zeta
    static fs::path zeta_system;
    static std::int64_t zeta_n = 0;
    static std::int64_t zeta_samples = 100000;
    static std::int64_t zeta_exact_k = 10;
    auto* zeta_cmd = app.add_subcommand(
        "zeta", "empirical one-step loss law against the exact one");
    zeta_cmd->add_option("--system", zeta_system, "single-site system file")
        ->required()
        ->check(CLI::ExistingFile);
    zeta_cmd->add_option("--n", zeta_n, "count before the jump")
        ->required()
        ->check(CLI::PositiveNumber);
    zeta_cmd->add_option("--samples", zeta_samples, "single-jump samples")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    zeta_cmd
        ->add_option("--exact-k", zeta_exact_k,
                     "fill the exact column up to this k")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    arm(zeta_cmd, &zeta_system, [&] {
        return run_zeta(ctx, g, zeta_system, zeta_n, zeta_samples, zeta_exact_k);
    });

    // bound
    static fs::path bound_system;
    static std::int64_t bound_n = 0;
    static double bound_t = 1.0;
    static double bound_dt = 1e-4;
    auto* bound_cmd = app.add_subcommand(
        "bound", "deterministic envelope of the expected total count");
    bound_cmd->add_option("--system", bound_system, "system file")
        ->required()
        ->check(CLI::ExistingFile);
    bound_cmd->add_option("--n", bound_n, "particles per site at time zero")
        ->required()
        ->check(CLI::PositiveNumber);
    bound_cmd->add_option("--t", bound_t, "horizon")->capture_default_str();
    bound_cmd->add_option("--dt", bound_dt, "integrator step")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    arm(bound_cmd, &bound_system, [&] {
        return run_bound(ctx, g, bound_system, bound_n, bound_t, bound_dt);
    });

    // trunc-sweep
    static fs::path sweep_system;
    static double sweep_t = 1.0;
    static std::vector<std::int64_t> sweep_truncs;
    auto* sweep_cmd = app.add_subcommand(
        "trunc-sweep", "sensitivity of results to the truncation level");
    sweep_cmd->add_option("--system", sweep_system, "system file")
        ->required()
        ->check(CLI::ExistingFile);
    sweep_cmd->add_option("--t", sweep_t, "horizon")->capture_default_str();
    sweep_cmd
        ->add_option("--truncs", sweep_truncs,
                     "truncation levels (default 250,500,1000,2000,4000)")
        ->delimiter(',');
    arm(sweep_cmd, &sweep_system, [&] {
        return run_trunc_sweep(ctx, g, sweep_system, sweep_t, sweep_truncs);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return rc;
}
