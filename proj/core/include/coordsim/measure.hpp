#pragma once

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "coordsim/errors.hpp"

namespace coordsim {

/// Which of the four coordinated actions a measure drives.  The tag only
/// selects validation defaults downstream (coalescence weights pairs, the
/// others weight single particles); it does not change any integral.
enum class ActionKind { Coalescence, Death, Migration, Reproduction };

/// Point mass at a position in (0, 1].
struct Atom {
    double z = 0.0;
    double mass = 0.0;
};

struct GridPoint {
    double z = 0.0;
    double f = 0.0;
};

struct NoDensity {};

/// f(z) = value on (0, 1].
struct ConstantDensity {
    double value = 0.0;
};

/// f(z) = scale * z^{-gamma} on (0, 1]; gamma < 1 keeps the mass finite.
struct PowerLawDensity {
    double scale = 1.0;
    double gamma = 0.0;
};

/// f(z) = scale * z^{a-1} (1-z)^{b-1} / B(a, b): a Beta(a, b) profile
/// carrying total density mass `scale`.
struct BetaDensity {
    double a = 1.0;
    double b = 1.0;
    double scale = 1.0;
};

/// Piecewise-linear interpolation through (z, f) points with strictly
/// increasing z; extended by its boundary values outside the grid.
struct TabulatedDensity {
    std::vector<GridPoint> grid;
};

using Density = std::variant<NoDensity, ConstantDensity, PowerLawDensity,
                             BetaDensity, TabulatedDensity>;

/// View of a density as coeff * z^{a-1} (1-z)^{b-1}, when it has that shape.
/// Constant(c) -> (c, 1, 1); PowerLaw(s, g) -> (s, 1-g, 1);
/// BetaDensity(a, b, s) -> (s / B(a,b), a, b).  Tabulated has no such view.
struct BetaKernel {
    double coeff = 0.0;
    double a = 1.0;
    double b = 1.0;
};

std::optional<BetaKernel> as_beta_kernel(const Density& density);

/// Small-z behavior certificate: Kingman for a pure atom at zero, Regular
/// when the density is provably ~ B z^{1-alpha} with alpha in (1, 2),
/// Unknown otherwise (mixtures are deliberately not classified).
struct RegularityProfile {
    enum class Kind { Kingman, Regular, Unknown };
    Kind kind = Kind::Unknown;
    double B = 0.0;
    double alpha = 0.0;
};

/// A finite measure on [0, 1]: an atom at 0, point masses in (0, 1], and a
/// density.  Immutable after construction; all queries are pure and safe to
/// call concurrently.
class MeasureSpec {
public:
    /// The zero measure.
    MeasureSpec() = default;

    /// Validates every invariant (finite nonnegative masses, atom positions
    /// in (0, 1], density family parameter ranges) and precomputes the total
    /// mass; throws ValidationError naming the violated invariant.
    MeasureSpec(double atom_zero, std::vector<Atom> atoms,
                Density density = NoDensity{},
                ActionKind label = ActionKind::Coalescence);

    static MeasureSpec dirac_zero(double mass,
                                  ActionKind label = ActionKind::Coalescence) {
        return MeasureSpec(mass, {}, NoDensity{}, label);
    }

    double atom_zero() const { return atom_zero_; }
    const std::vector<Atom>& atoms() const { return atoms_; }
    const Density& density() const { return density_; }
    ActionKind label() const { return label_; }

    double total_mass() const { return total_mass_; }
    double density_mass() const { return density_mass_; }
    /// Mass of the restriction to (0, 1] (everything except the atom at 0).
    double plus_mass() const { return total_mass_ - atom_zero_; }

    bool is_zero() const { return total_mass_ == 0.0; }
    bool has_atom_at_one() const;

    /// Pointwise density value on (0, 1); may be +inf at an endpoint of a
    /// singular family.  Atoms are not included.
    double density_at(double z) const;

    RegularityProfile regularity() const;

private:
    double atom_zero_ = 0.0;
    std::vector<Atom> atoms_;
    Density density_ = NoDensity{};
    ActionKind label_ = ActionKind::Coalescence;
    double density_mass_ = 0.0;
    double total_mass_ = 0.0;
};

/// integral of z^{k-w} (1-z)^{b-k} mu(dz): the kernel every blockwise rate
/// reduces to.  The atom at 0 contributes exactly when k == w.  Closed form
/// for PowerLaw/BetaDensity, adaptive quadrature for Constant/Tabulated.
/// Requires w in {1, 2}, k >= w, b >= k.
double weighted_moment(const MeasureSpec& mu, std::int64_t k, std::int64_t b,
                       int w);

/// Effective total coordinated-event rate over mu restricted to (0, 1]:
///   w = 1: integral of (1 - (1-z)^n) z^{-1} mu+(dz)
///   w = 2: integral of (1 - (1-z)^n - n z (1-z)^{n-1}) z^{-2} mu+(dz)
/// Equals the binomial sum of weighted moments over k >= w (tested
/// identity).  Requires w in {1, 2}, n >= 1; identically 0 for w=2, n=1.
double survival_integral(const MeasureSpec& mu, std::int64_t n, int w);

} // namespace coordsim
