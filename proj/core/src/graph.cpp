#include "coordsim/graph.hpp"

#include <algorithm>
#include <deque>

#include "coordsim/errors.hpp"

namespace coordsim {
namespace {

// A step is strong if either its migration or its reproduction measure
// moves infinitely many particles; a decided Negative needs both decided.
Verdict disjoin_strength(const MeasureSpec& m, const MeasureSpec& r,
                         const MeasureSpec& lambda) {
    Verdict best;
    best.outcome = Outcome::Negative;
    for (const MeasureSpec* mover : {&m, &r}) {
        if (mover->is_zero()) continue;
        Verdict v = is_lambda_strong(*mover, lambda);
        if (v.outcome == Outcome::Positive) return v;
        if (v.outcome == Outcome::Inconclusive) best = v;
    }
    return best;
}

} // namespace

SystemSpec::SystemSpec(std::vector<std::string> names,
                       std::vector<MeasureSpec> coalescence,
                       std::vector<MeasureSpec> death,
                       std::vector<MeasureSpec> migration,
                       std::vector<MeasureSpec> reproduction,
                       std::vector<InitialCount> initial)
    : names_(std::move(names)),
      coalescence_(std::move(coalescence)),
      death_(std::move(death)),
      migration_(std::move(migration)),
      reproduction_(std::move(reproduction)),
      initial_(std::move(initial)) {
    const std::size_t n = names_.size();
    if (n == 0) throw ValidationError("system: needs at least one site");
    for (std::size_t i = 0; i < n; ++i) {
        if (names_[i].empty())
            throw ValidationError("system: site names must be nonempty");
        for (std::size_t j = i + 1; j < n; ++j)
            if (names_[i] == names_[j])
                throw ValidationError("system: duplicate site name '" +
                                      names_[i] + "'");
    }
    if (coalescence_.size() != n || death_.size() != n ||
        initial_.size() != n || migration_.size() != n * n ||
        reproduction_.size() != n * n)
        throw ValidationError(
            "system: measure and count slots must match the site list");
    for (std::size_t v = 0; v < n; ++v) {
        if (!migration_[v * n + v].is_zero())
            throw ValidationError("system: migration from '" + names_[v] +
                                  "' to itself must be the zero measure");
        if (!initial_[v].is_infinite && initial_[v].count < 0)
            throw ValidationError("system: initial counts must be >= 0");
    }
}

std::size_t SystemSpec::index_of(std::string_view name) const {
    for (std::size_t v = 0; v < names_.size(); ++v)
        if (names_[v] == name) return v;
    throw ValidationError("system: unknown site name '" + std::string(name) +
                          "'");
}

bool SystemSpec::has_reproduction() const {
    for (const auto& r : reproduction_)
        if (!r.is_zero()) return true;
    return false;
}

bool SystemSpec::any_atom_at_one() const {
    auto check = [](const std::vector<MeasureSpec>& ms) {
        for (const auto& m : ms)
            if (m.has_atom_at_one()) return true;
        return false;
    };
    return check(coalescence_) || check(death_) || check(migration_) ||
           check(reproduction_);
}

SystemBuilder::SystemBuilder(std::vector<std::string> names)
    : names_(std::move(names)),
      coalescence_(names_.size()),
      death_(names_.size()),
      migration_(names_.size() * names_.size()),
      reproduction_(names_.size() * names_.size()),
      initial_(names_.size()) {}

std::size_t SystemBuilder::at(std::string_view name) const {
    for (std::size_t v = 0; v < names_.size(); ++v)
        if (names_[v] == name) return v;
    throw ValidationError("system: unknown site name '" + std::string(name) +
                          "'");
}

SystemBuilder& SystemBuilder::coalescence(std::string_view site,
                                          MeasureSpec m) {
    coalescence_[at(site)] = std::move(m);
    return *this;
}

SystemBuilder& SystemBuilder::death(std::string_view site, MeasureSpec m) {
    death_[at(site)] = std::move(m);
    return *this;
}

SystemBuilder& SystemBuilder::migration(std::string_view from,
                                        std::string_view to, MeasureSpec m) {
    migration_[at(from) * names_.size() + at(to)] = std::move(m);
    return *this;
}

SystemBuilder& SystemBuilder::reproduction(std::string_view from,
                                           std::string_view to,
                                           MeasureSpec m) {
    reproduction_[at(from) * names_.size() + at(to)] = std::move(m);
    return *this;
}

SystemBuilder& SystemBuilder::initial(std::string_view site, InitialCount c) {
    initial_[at(site)] = c;
    return *this;
}

SystemSpec SystemBuilder::build() const {
    return SystemSpec(names_, coalescence_, death_, migration_,
                      reproduction_, initial_);
}

InteractionGraph build_interaction_graph(const SystemSpec& sys) {
    const std::size_t n = sys.size();
    InteractionGraph g;
    for (std::size_t u = 0; u < n; ++u)
        for (std::size_t v = u + 1; v < n; ++v) {
            if (!sys.migration(u, v).is_zero() ||
                !sys.migration(v, u).is_zero() ||
                !sys.reproduction(u, v).is_zero() ||
                !sys.reproduction(v, u).is_zero())
                g.edges.emplace_back(u, v);
        }
    g.site_cdi.reserve(n);
    for (std::size_t v = 0; v < n; ++v)
        g.site_cdi.push_back(comes_down(sys.coalescence(v)));
    for (std::size_t u = 0; u < n; ++u) {
        if (g.site_cdi[u].outcome != Outcome::Positive) continue;
        for (std::size_t v = 0; v < n; ++v) {
            if (u == v) continue;
            if (sys.migration(u, v).is_zero() &&
                sys.reproduction(u, v).is_zero())
                continue;
            g.strengths.push_back(
                {u, v,
                 disjoin_strength(sys.migration(u, v),
                                  sys.reproduction(u, v),
                                  sys.coalescence(u))});
        }
    }
    return g;
}

StaysInfiniteReport stays_infinite(const SystemSpec& sys) {
    if (sys.any_atom_at_one())
        throw AtomAtOne(
            "stays_infinite: measures with an atom at 1 are outside the "
            "classification");
    const std::size_t n = sys.size();
    const InteractionGraph g = build_interaction_graph(sys);

    auto strength_at = [&](std::size_t u, std::size_t v) -> const Verdict* {
        for (const auto& s : g.strengths)
            if (s.from == u && s.to == v) return &s.verdict;
        return nullptr;
    };

    StaysInfiniteReport report;
    std::vector<std::size_t> sources;
    for (std::size_t v = 0; v < n; ++v)
        if (sys.initial(v).is_infinite) sources.push_back(v);
    if (sources.empty()) {
        report.outcome = Outcome::Negative;
        report.explanation =
            "every site starts with finitely many particles";
        return report;
    }

    // Shortest escape route: breadth-first over decided-strong steps
    // through sites whose coalescent is decided to come down.
    std::vector<std::size_t> parent(n, n);
    std::vector<bool> seen(n, false);
    std::deque<std::size_t> queue;
    auto emit_witness = [&](std::size_t terminal) {
        std::vector<std::size_t> path{terminal};
        while (parent[path.back()] != n) path.push_back(parent[path.back()]);
        for (auto it = path.rbegin(); it != path.rend(); ++it)
            report.witness.push_back(sys.name(*it));
        report.outcome = Outcome::Positive;
    };
    for (std::size_t s : sources) {
        if (g.site_cdi[s].outcome == Outcome::Negative) {
            emit_witness(s);
            report.explanation = "site '" + sys.name(s) +
                                 "' starts infinite and never comes down";
            return report;
        }
        if (g.site_cdi[s].outcome == Outcome::Positive && !seen[s]) {
            seen[s] = true;
            queue.push_back(s);
        }
    }
    while (!queue.empty()) {
        const std::size_t u = queue.front();
        queue.pop_front();
        for (std::size_t v = 0; v < n; ++v) {
            if (v == u || seen[v]) continue;
            const Verdict* sv = strength_at(u, v);
            if (!sv || sv->outcome != Outcome::Positive) continue;
            if (g.site_cdi[v].outcome == Outcome::Negative) {
                parent[v] = u;
                emit_witness(v);
                report.explanation =
                    "infinitely many particles escape to site '" +
                    sys.name(v) + "', which never comes down";
                return report;
            }
            if (g.site_cdi[v].outcome == Outcome::Positive) {
                seen[v] = true;
                parent[v] = u;
                queue.push_back(v);
            }
        }
    }

    // No certain route.  A Negative needs a reproduction-free system and
    // no undecided verdict anywhere particles could plausibly reach.
    if (sys.has_reproduction()) {
        report.outcome = Outcome::Inconclusive;
        report.explanation =
            "no escape route found, but reproduction is present and the "
            "route criterion is only sufficient";
        return report;
    }
    std::vector<bool> possible(n, false);
    std::deque<std::size_t> optimistic;
    for (std::size_t s : sources) {
        possible[s] = true;
        optimistic.push_back(s);
    }
    while (!optimistic.empty()) {
        const std::size_t u = optimistic.front();
        optimistic.pop_front();
        for (std::size_t v = 0; v < n; ++v) {
            if (v == u || possible[v]) continue;
            if (sys.migration(u, v).is_zero() &&
                sys.reproduction(u, v).is_zero())
                continue;
            const Verdict* sv = strength_at(u, v);
            // Undefined strength (undecided source coalescent) or an
            // Inconclusive verdict may still hide a strong step.
            if (sv && sv->outcome == Outcome::Negative) continue;
            possible[v] = true;
            optimistic.push_back(v);
        }
    }
    for (std::size_t v = 0; v < n; ++v) {
        if (!possible[v]) continue;
        if (g.site_cdi[v].outcome != Outcome::Positive) {
            report.outcome = Outcome::Inconclusive;
            report.explanation = "verdicts along routes through site '" +
                                 sys.name(v) + "' are undecided";
            return report;
        }
    }
    report.outcome = Outcome::Negative;
    report.explanation =
        "every reachable site comes down and no strong escape step exists";
    return report;
}

} // namespace coordsim
