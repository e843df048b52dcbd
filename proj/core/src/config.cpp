#include "coordsim/config.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "coordsim/errors.hpp"
#include "json.hpp"

namespace coordsim {

namespace {

using json = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw SchemaError("config: " + what + " at " + path);
}

void expect_object(const json& v, const std::string& path) {
    if (!v.is_object()) fail(path, "expected an object");
}

void expect_keys(const json& obj, const std::string& path,
                 std::initializer_list<std::string_view> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const std::string_view k : allowed)
            if (it.key() == k) {
                known = true;
                break;
            }
        if (!known) fail(path + "." + it.key(), "unknown key");
    }
}

double number_at(const json& v, const std::string& path) {
    if (!v.is_number()) fail(path, "expected a number");
    return v.get<double>();
}

std::string string_at(const json& v, const std::string& path) {
    if (!v.is_string()) fail(path, "expected a string");
    return v.get<std::string>();
}

std::vector<std::pair<double, double>> pair_list(const json& v,
                                                 const std::string& path) {
    if (!v.is_array()) fail(path, "expected an array of [x, y] pairs");
    std::vector<std::pair<double, double>> out;
    out.reserve(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const std::string p = path + "[" + std::to_string(i) + "]";
        const json& entry = v[i];
        if (!entry.is_array() || entry.size() != 2)
            fail(p, "expected an [x, y] pair");
        out.emplace_back(number_at(entry[0], p + "[0]"),
                         number_at(entry[1], p + "[1]"));
    }
    return out;
}

Density density_from(const json& v, const std::string& path) {
    expect_object(v, path);
    if (!v.contains("family")) fail(path + ".family", "missing key");
    const std::string family = string_at(v["family"], path + ".family");
    if (family == "constant") {
        expect_keys(v, path, {"family", "mass"});
        if (!v.contains("mass")) fail(path + ".mass", "missing key");
        return ConstantDensity{number_at(v["mass"], path + ".mass")};
    }
    if (family == "power_law") {
        expect_keys(v, path, {"family", "scale", "gamma"});
        if (!v.contains("scale")) fail(path + ".scale", "missing key");
        if (!v.contains("gamma")) fail(path + ".gamma", "missing key");
        return PowerLawDensity{number_at(v["scale"], path + ".scale"),
                               number_at(v["gamma"], path + ".gamma")};
    }
    if (family == "beta") {
        expect_keys(v, path, {"family", "a", "b", "scale"});
        if (!v.contains("a")) fail(path + ".a", "missing key");
        if (!v.contains("b")) fail(path + ".b", "missing key");
        BetaDensity d{number_at(v["a"], path + ".a"),
                      number_at(v["b"], path + ".b"), 1.0};
        if (v.contains("scale")) d.scale = number_at(v["scale"], path + ".scale");
        return d;
    }
    if (family == "tabulated") {
        expect_keys(v, path, {"family", "grid"});
        if (!v.contains("grid")) fail(path + ".grid", "missing key");
        TabulatedDensity d;
        for (const auto& [z, value] : pair_list(v["grid"], path + ".grid"))
            d.grid.push_back({z, value});
        return d;
    }
    fail(path + ".family", "unknown density family '" + family + "'");
}

MeasureSpec measure_from(const json& v, const std::string& path,
                         ActionKind label) {
    expect_object(v, path);
    expect_keys(v, path, {"atom_zero", "atoms", "density"});
    double atom_zero = 0.0;
    if (v.contains("atom_zero"))
        atom_zero = number_at(v["atom_zero"], path + ".atom_zero");
    std::vector<Atom> atoms;
    if (v.contains("atoms"))
        for (const auto& [z, mass] : pair_list(v["atoms"], path + ".atoms"))
            atoms.push_back({z, mass});
    Density density = NoDensity{};
    if (v.contains("density"))
        density = density_from(v["density"], path + ".density");
    try {
        return MeasureSpec(atom_zero, std::move(atoms), std::move(density), label);
    } catch (const ValidationError& e) {
        throw ValidationError(path + ": " + e.what());
    }
}

InitialCount initial_from(const json& v, const std::string& path) {
    if (v.is_string()) {
        if (v.get<std::string>() == "infinity") return InitialCount::infinity();
        fail(path, "expected a count or \"infinity\"");
    }
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
        fail(path, "expected a nonnegative integer count");
    return InitialCount::finite(v.get<std::int64_t>());
}

json parse_text(const std::string& text, const std::string& origin) {
    json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded())
        throw SchemaError("config: " + origin + " is not valid JSON");
    return doc;
}

std::string read_file(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw SchemaError("config: cannot read " + file.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

SystemSpec system_from(const json& doc) {
    expect_object(doc, "$");
    expect_keys(doc, "$",
                {"version", "sites", "coalescence", "death", "migration",
                 "reproduction", "initial"});
    if (!doc.contains("version")) fail("$.version", "missing key");
    if (!doc["version"].is_number_integer() ||
        doc["version"].get<std::int64_t>() != 1)
        fail("$.version", "unsupported schema version");
    if (!doc.contains("sites") || !doc["sites"].is_array() ||
        doc["sites"].empty())
        fail("$.sites", "expected a nonempty array of site names");

    std::vector<std::string> sites;
    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < doc["sites"].size(); ++i) {
        const std::string p = "$.sites[" + std::to_string(i) + "]";
        std::string name = string_at(doc["sites"][i], p);
        if (name.empty()) fail(p, "empty site name");
        if (!seen.insert(name).second) fail(p, "duplicate site name");
        sites.push_back(std::move(name));
    }

    SystemBuilder builder(sites);
    auto known_site = [&](const std::string& name, const std::string& path) {
        if (!seen.count(name)) fail(path, "unknown site '" + name + "'");
    };

    const struct {
        const char* key;
        ActionKind kind;
    } site_channels[] = {{"coalescence", ActionKind::Coalescence},
                         {"death", ActionKind::Death}};
    for (const auto& ch : site_channels) {
        if (!doc.contains(ch.key)) continue;
        const std::string base = std::string("$.") + ch.key;
        expect_object(doc[ch.key], base);
        for (auto it = doc[ch.key].begin(); it != doc[ch.key].end(); ++it) {
            const std::string p = base + "." + it.key();
            known_site(it.key(), p);
            MeasureSpec m = measure_from(it.value(), p, ch.kind);
            if (ch.kind == ActionKind::Coalescence)
                builder.coalescence(it.key(), std::move(m));
            else
                builder.death(it.key(), std::move(m));
        }
    }

    const struct {
        const char* key;
        ActionKind kind;
    } pair_channels[] = {{"migration", ActionKind::Migration},
                         {"reproduction", ActionKind::Reproduction}};
    for (const auto& ch : pair_channels) {
        if (!doc.contains(ch.key)) continue;
        const std::string base = std::string("$.") + ch.key;
        expect_object(doc[ch.key], base);
        for (auto from = doc[ch.key].begin(); from != doc[ch.key].end();
             ++from) {
            const std::string pf = base + "." + from.key();
            known_site(from.key(), pf);
            expect_object(from.value(), pf);
            for (auto to = from.value().begin(); to != from.value().end();
                 ++to) {
                const std::string pt = pf + "." + to.key();
                known_site(to.key(), pt);
                MeasureSpec m = measure_from(to.value(), pt, ch.kind);
                if (ch.kind == ActionKind::Migration)
                    builder.migration(from.key(), to.key(), std::move(m));
                else
                    builder.reproduction(from.key(), to.key(), std::move(m));
            }
        }
    }

    if (doc.contains("initial")) {
        expect_object(doc["initial"], "$.initial");
        for (auto it = doc["initial"].begin(); it != doc["initial"].end();
             ++it) {
            const std::string p = "$.initial." + it.key();
            known_site(it.key(), p);
            builder.initial(it.key(), initial_from(it.value(), p));
        }
    }

    return builder.build();
}

json measure_json(const MeasureSpec& m) {
    json j = json::object();
    if (m.atom_zero() != 0.0) j["atom_zero"] = m.atom_zero();
    if (!m.atoms().empty()) {
        json atoms = json::array();
        for (const Atom& a : m.atoms()) atoms.push_back({a.z, a.mass});
        j["atoms"] = std::move(atoms);
    }
    if (const auto* d = std::get_if<ConstantDensity>(&m.density())) {
        j["density"] = {{"family", "constant"}, {"mass", d->value}};
    } else if (const auto* d = std::get_if<PowerLawDensity>(&m.density())) {
        j["density"] = {{"family", "power_law"},
                        {"scale", d->scale},
                        {"gamma", d->gamma}};
    } else if (const auto* d = std::get_if<BetaDensity>(&m.density())) {
        j["density"] = {{"family", "beta"},
                        {"a", d->a},
                        {"b", d->b},
                        {"scale", d->scale}};
    } else if (const auto* d = std::get_if<TabulatedDensity>(&m.density())) {
        json grid = json::array();
        for (const GridPoint& g : d->grid) grid.push_back({g.z, g.f});
        j["density"] = {{"family", "tabulated"}, {"grid", std::move(grid)}};
    }
    return j;
}

}  // namespace

SystemSpec parse_system_text(const std::string& text) {
    return system_from(parse_text(text, "input"));
}

SystemSpec parse_system(const std::filesystem::path& file) {
    return system_from(parse_text(read_file(file), file.string()));
}

MeasureSpec parse_measure_text(const std::string& text) {
    return measure_from(parse_text(text, "input"), "$",
                        ActionKind::Coalescence);
}

MeasureSpec parse_measure(const std::filesystem::path& file) {
    return measure_from(parse_text(read_file(file), file.string()), "$",
                        ActionKind::Coalescence);
}

std::string serialize_system(const SystemSpec& sys) {
    json doc;
    doc["version"] = 1;
    doc["sites"] = sys.names();

    json coal = json::object();
    json death = json::object();
    for (std::size_t v = 0; v < sys.size(); ++v) {
        if (!sys.coalescence(v).is_zero())
            coal[sys.name(v)] = measure_json(sys.coalescence(v));
        if (!sys.death(v).is_zero())
            death[sys.name(v)] = measure_json(sys.death(v));
    }
    if (!coal.empty()) doc["coalescence"] = std::move(coal);
    if (!death.empty()) doc["death"] = std::move(death);

    json mig = json::object();
    json rep = json::object();
    for (std::size_t u = 0; u < sys.size(); ++u) {
        json mig_row = json::object();
        json rep_row = json::object();
        for (std::size_t v = 0; v < sys.size(); ++v) {
            if (!sys.migration(u, v).is_zero())
                mig_row[sys.name(v)] = measure_json(sys.migration(u, v));
            if (!sys.reproduction(u, v).is_zero())
                rep_row[sys.name(v)] = measure_json(sys.reproduction(u, v));
        }
        if (!mig_row.empty()) mig[sys.name(u)] = std::move(mig_row);
        if (!rep_row.empty()) rep[sys.name(u)] = std::move(rep_row);
    }
    if (!mig.empty()) doc["migration"] = std::move(mig);
    if (!rep.empty()) doc["reproduction"] = std::move(rep);

    json initial = json::object();
    for (std::size_t v = 0; v < sys.size(); ++v) {
        const InitialCount& c = sys.initial(v);
        if (c.is_infinite)
            initial[sys.name(v)] = "infinity";
        else
            initial[sys.name(v)] = c.count;
    }
    doc["initial"] = std::move(initial);

    return doc.dump(2) + "\n";
}

}  // namespace coordsim
