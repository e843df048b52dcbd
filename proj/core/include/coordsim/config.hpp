#pragma once

#include <filesystem>
#include <string>

#include "coordsim/graph.hpp"
#include "coordsim/measure.hpp"

namespace coordsim {

/// Parses a versioned JSON system description.  Schema (version 1):
///
///   {
///     "version": 1,
///     "sites": ["u", "v"],
///     "coalescence": {"u": <measure>},
///     "death": {"u": <measure>},
///     "migration": {"u": {"v": <measure>}},
///     "reproduction": {"u": {"u": <measure>}},
///     "initial": {"u": "infinity", "v": 100}
///   }
///
/// where <measure> is {"atom_zero": c, "atoms": [[z, mass]...],
/// "density": {"family": ..., <params>}} with families "constant" (mass),
/// "power_law" (scale, gamma), "beta" (a, b, scale), and "tabulated"
/// (grid: [[z, value]...]).  Every key is optional except version and
/// sites; absent measures are zero, absent initial counts are zero, and
/// the string "infinity" marks an infinite initial count.
///
/// Structural problems (unknown keys, wrong types, unknown sites) raise
/// SchemaError naming the offending path; semantic problems (infinite
/// mass, negative counts) raise ValidationError.
SystemSpec parse_system(const std::filesystem::path& file);
SystemSpec parse_system_text(const std::string& text);

/// Parses a file holding a bare <measure> object.
MeasureSpec parse_measure(const std::filesystem::path& file);
MeasureSpec parse_measure_text(const std::string& text);

/// Canonical serialization of a system; parsing it back reproduces the
/// same canonical form byte for byte.
std::string serialize_system(const SystemSpec& sys);

}  // namespace coordsim
