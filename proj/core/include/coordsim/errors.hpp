#pragma once

#include <stdexcept>
#include <string>

namespace coordsim {

/// Caller violated a documented precondition (bad argument ranges etc).
class PreconditionViolated : public std::invalid_argument {
public:
    explicit PreconditionViolated(const std::string& what)
        : std::invalid_argument(what) {}
};

/// Input data fails a semantic validity check (infinite mass, negative mass...).
class ValidationError : public std::invalid_argument {
public:
    explicit ValidationError(const std::string& what)
        : std::invalid_argument(what) {}
};

/// Structural problem in a configuration document (unknown key, wrong type).
class SchemaError : public std::runtime_error {
public:
    explicit SchemaError(const std::string& what) : std::runtime_error(what) {}
};

/// Adaptive integration could not reach the requested tolerance.
class QuadratureFailure : public std::runtime_error {
public:
    explicit QuadratureFailure(const std::string& what)
        : std::runtime_error(what) {}
};

/// A loss distribution was requested for a state with zero total event rate.
class DegenerateChain : public std::runtime_error {
public:
    explicit DegenerateChain(const std::string& what)
        : std::runtime_error(what) {}
};

/// Classification requested for a measure with an atom at z = 1.
class AtomAtOne : public std::invalid_argument {
public:
    explicit AtomAtOne(const std::string& what)
        : std::invalid_argument(what) {}
};

/// An operation that needs positive total mass was given the zero measure.
class ZeroMeasure : public std::invalid_argument {
public:
    explicit ZeroMeasure(const std::string& what)
        : std::invalid_argument(what) {}
};

/// A strength query was made against a coalescence measure that does not
/// come down from infinity, where the notion is undefined.
class StrengthUndefined : public std::logic_error {
public:
    explicit StrengthUndefined(const std::string& what)
        : std::logic_error(what) {}
};

/// A jump was requested from a state with zero total event rate.
class Absorbed : public std::runtime_error {
public:
    explicit Absorbed(const std::string& what) : std::runtime_error(what) {}
};

/// Rejection sampler exceeded its iteration budget.
class SamplerFailure : public std::runtime_error {
public:
    explicit SamplerFailure(const std::string& what)
        : std::runtime_error(what) {}
};

/// Pathwise domination between coupled trajectories was broken.
class OrderingViolation : public std::logic_error {
public:
    explicit OrderingViolation(const std::string& what)
        : std::logic_error(what) {}
};

/// An iterative solver failed to converge.
class ConvergenceFailure : public std::runtime_error {
public:
    explicit ConvergenceFailure(const std::string& what)
        : std::runtime_error(what) {}
};

} // namespace coordsim
