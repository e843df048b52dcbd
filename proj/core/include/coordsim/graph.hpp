#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "coordsim/criteria.hpp"
#include "coordsim/measure.hpp"

namespace coordsim {

struct InitialCount {
    bool is_infinite = false;
    std::int64_t count = 0;

    static InitialCount finite(std::int64_t n) { return {false, n}; }
    static InitialCount infinity() { return {true, 0}; }
};

// A finite collection of sites with per-site coalescence and death
// measures, per-ordered-pair migration and reproduction measures, and
// initial particle counts.  Absent measures are the zero measure.
class SystemSpec {
public:
    SystemSpec(std::vector<std::string> names,
               std::vector<MeasureSpec> coalescence,
               std::vector<MeasureSpec> death,
               std::vector<MeasureSpec> migration,
               std::vector<MeasureSpec> reproduction,
               std::vector<InitialCount> initial);

    std::size_t size() const { return names_.size(); }
    const std::vector<std::string>& names() const { return names_; }
    const std::string& name(std::size_t v) const { return names_[v]; }
    std::size_t index_of(std::string_view name) const;

    const MeasureSpec& coalescence(std::size_t v) const {
        return coalescence_[v];
    }
    const MeasureSpec& death(std::size_t v) const { return death_[v]; }
    const MeasureSpec& migration(std::size_t u, std::size_t v) const {
        return migration_[u * size() + v];
    }
    const MeasureSpec& reproduction(std::size_t u, std::size_t v) const {
        return reproduction_[u * size() + v];
    }
    const InitialCount& initial(std::size_t v) const { return initial_[v]; }

    bool has_reproduction() const;
    bool any_atom_at_one() const;

private:
    std::vector<std::string> names_;
    std::vector<MeasureSpec> coalescence_;
    std::vector<MeasureSpec> death_;
    std::vector<MeasureSpec> migration_;
    std::vector<MeasureSpec> reproduction_;
    std::vector<InitialCount> initial_;
};

// Incremental construction keyed by site name; every slot starts as the
// zero measure and every site starts empty.
class SystemBuilder {
public:
    explicit SystemBuilder(std::vector<std::string> names);

    SystemBuilder& coalescence(std::string_view site, MeasureSpec m);
    SystemBuilder& death(std::string_view site, MeasureSpec m);
    SystemBuilder& migration(std::string_view from, std::string_view to,
                             MeasureSpec m);
    SystemBuilder& reproduction(std::string_view from, std::string_view to,
                                MeasureSpec m);
    SystemBuilder& initial(std::string_view site, InitialCount c);

    SystemSpec build() const;

private:
    std::size_t at(std::string_view name) const;

    std::vector<std::string> names_;
    std::vector<MeasureSpec> coalescence_;
    std::vector<MeasureSpec> death_;
    std::vector<MeasureSpec> migration_;
    std::vector<MeasureSpec> reproduction_;
    std::vector<InitialCount> initial_;
};

struct DirectedStrength {
    std::size_t from = 0;
    std::size_t to = 0;
    Verdict verdict;
};

// Undirected edges between interacting sites, plus strength verdicts for
// every directed pair whose source coalescent comes down (the only case
// where strength is defined).
struct InteractionGraph {
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    std::vector<Verdict> site_cdi;
    std::vector<DirectedStrength> strengths;
};

InteractionGraph build_interaction_graph(const SystemSpec& sys);

struct StaysInfiniteReport {
    Outcome outcome = Outcome::Inconclusive;
    // Site names along the escape route when Positive; a single entry
    // means the starting site itself never comes down.
    std::vector<std::string> witness;
    std::string explanation;
};

// Whether some site keeps infinitely many particles forever: Positive via
// an explicit escape route of strong steps ending at a site that does not
// come down, Negative when every verdict is decided and no route exists in
// a reproduction-free system, Inconclusive otherwise.
StaysInfiniteReport stays_infinite(const SystemSpec& sys);

} // namespace coordsim
