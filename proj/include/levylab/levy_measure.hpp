#pragma once

// Levy measures on R^m \ {0} and the intensity functionals built on them:
// truncated cone moments, upper/lower order indices, the wide cone condition
// and the small/big jump moment conditions.

#include "levylab/directions.hpp"
#include "levylab/types.hpp"

#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace levylab {

struct Atom {
    Vector location;
    double weight = 0.0;
};

/// k -> (u_k, w_k) for k = 1, 2, ...
using AtomGenerator = std::function<Atom(int)>;

struct AtomicSequence {
    int dim = 1;
    std::string label;
    AtomGenerator generator;
    int n_max = 60;
    /// Largest index for which the generator is representable (e.g. 1/k! > 0).
    int n_limit = std::numeric_limits<int>::max();
    /// Optional analytic bound on sum_{k > n} w_k |u_k|^2; geometric domination otherwise.
    std::function<double(int)> analytic_tail;

    static AtomicSequence geometric(double gamma, int n_max = 60, double weight = 1.0);
    /// sum_n n * delta_{1/n!}
    static AtomicSequence factorial_weighted(int n_max = 60);
    /// sum_n delta_{1/n!}
    static AtomicSequence factorial(int n_max = 60);
    /// sum_k delta_{(1/k!, 1/(k!)^2)} in R^2
    static AtomicSequence parabola(int n_max = 60);
    static AtomicSequence table(std::vector<Atom> atoms);
};

/// Radial profile pi(rho) of Pi along each ray, stored as s = ln(rho) -> ln pi(rho).
struct RadialProfile {
    std::string label;
    std::function<double(double)> log_density;
    double rho_min = 0.0;
    double rho_max = std::numeric_limits<double>::infinity();

    /// c * rho^{-1-alpha} * exp(-lambda * rho) on [rho_min, rho_max].
    static RadialProfile power_law(double c, double alpha, double lambda = 0.0, double rho_min = 0.0,
                                   double rho_max = std::numeric_limits<double>::infinity());
};

/// Finite angular measure on S_m given by weighted directions.
struct AngularMeasure {
    std::vector<Vector> directions;
    std::vector<double> weights;

    static AngularMeasure symmetric_1d(double weight_each = 1.0);
    static AngularMeasure one_sided_1d(double weight = 1.0);
    /// Uniform law of total mass `total` on S_m discretized on `count` lattice directions.
    static AngularMeasure uniform(int dim, double total = 1.0, int count = 512);
};

struct RadialDensity {
    int dim = 1;
    RadialProfile profile;
    AngularMeasure angular;
};

class LevyMeasure;

struct Mixture {
    std::vector<std::pair<double, LevyMeasure>> components;
};

/// One ray of a radial component after mixture flattening: mass weight * pi(rho) d rho
/// along `direction`.
struct RadialRay {
    Vector direction;
    double weight = 0.0;
    std::shared_ptr<const RadialProfile> profile;
};

/// Immutable Levy measure. Mixtures are flattened at construction into one
/// list of weighted atoms and one list of weighted radial rays; every
/// functional below is a sum over those two lists.
class LevyMeasure {
public:
    LevyMeasure() = default;
    static LevyMeasure zero(int dim);
    LevyMeasure(AtomicSequence atoms);
    LevyMeasure(RadialDensity radial);
    LevyMeasure(Mixture mixture);

    int dim() const { return dim_; }
    const std::string& description() const { return description_; }
    const std::vector<Atom>& atoms() const { return atoms_; }
    const std::vector<RadialRay>& rays() const { return rays_; }
    /// Upper bound on the second-moment mass sum w|u|^2 dropped by atom truncation.
    double tail_bound() const { return tail_bound_; }
    /// Value of int (|u|^2 ^ 1) Pi(du), finite by construction.
    double integrability_mass() const { return integrability_; }
    /// Atoms with index in (n_max, factor * n_max] of every atomic source,
    /// capped at the representable limit; used by the tail diagnostics.
    std::vector<Atom> extended_atoms(int factor) const;
    bool is_zero() const { return atoms_.empty() && rays_.empty(); }

private:
    void finalize();
    void append(const LevyMeasure& other, double multiplier);

    struct Source {
        AtomicSequence sequence;
        double multiplier;
    };

    int dim_ = 1;
    std::string description_;
    std::vector<Atom> atoms_;
    std::vector<RadialRay> rays_;
    std::vector<Source> sources_;
    double tail_bound_ = 0.0;
    double integrability_ = 0.0;
};

/// int_a^b rho^p pi(rho) d rho * exp(log_scale), clipped to the profile support.
double radial_power_integral(const RadialProfile& profile, double p, double a, double b,
                             double log_scale = 0.0);

// ---------------------------------------------------------------------------
// Intensity functionals

/// int_{V(v, aperture)} (|(u,v)| ^ eps)^r Pi(du) with v = cone.axis.
double truncated_moment(const LevyMeasure& measure, int r, double eps, const Cone& cone);

/// Whole-space version int (|(u,v)| ^ eps)^r Pi(du) for a unit vector v.
double truncated_moment(const LevyMeasure& measure, int r, double eps, const Vector& v);

/// One-dimensional shorthand (v = +1); throws InvalidArgument when dim > 1.
double truncated_moment(const LevyMeasure& measure, int r, double eps);

/// truncated moment / eps^r, computed without forming eps^r (safe for tiny
/// eps). With no aperture the integral runs over the whole space.
double normalized_truncated_moment(const LevyMeasure& measure, int r, double eps, const Vector& v,
                                   std::optional<double> aperture = std::nullopt);

/// Pi({|u| >= floor} intersected with the cone, if any).
double mass_above(const LevyMeasure& measure, double floor,
                  const std::optional<Cone>& cone = std::nullopt);

/// int_{lo <= |u| <= hi} u Pi(du)
Vector first_moment_vector(const LevyMeasure& measure, double lo, double hi);

/// int_{|u| < hi} u u^T Pi(du)
Matrix second_moment_matrix(const LevyMeasure& measure, double hi);

struct IndexProfile {
    int power = 2;            // 0 marks the lower index
    bool lower = false;
    std::optional<double> aperture;
    std::vector<double> eps;  // strictly decreasing
    std::vector<double> values;
    int direction_count = 0;
};

/// rho_r(aperture, eps) for each eps; the inf over S_m is taken on the lattice
/// and is therefore an upper bound of the true infimum.
IndexProfile order_index_profile(const LevyMeasure& measure, int r, double aperture,
                                 const std::vector<double>& eps_list, int direction_count = 256);

/// vartheta(eps); the sup over S_m on the lattice is a lower bound of the true supremum.
IndexProfile lower_index_profile(const LevyMeasure& measure, const std::vector<double>& eps_list,
                                 int direction_count = 256);

/// `count` log-spaced eps values from 1e-2 down to a floor that stays above
/// the smallest retained atom (so truncation does not masquerade as decay).
std::vector<double> default_eps_list(const LevyMeasure& measure, int count = 40);

struct IndexClass {
    enum class Kind { Zero, Finite, Infinite };
    Kind kind = Kind::Zero;
    double value = 0.0;        // tail mean for Finite
    double uncertainty = 0.0;  // tail standard deviation
    double slope = 0.0;        // d ln(value) / d ln ln(1/eps) over the tail
    bool aperture_stable = true;
};

std::string to_string(IndexClass::Kind kind);

/// Tail-slope classification of one profile (last 40% of the points,
/// least squares of ln(value) against ln ln(1/eps)).
IndexClass classify_index(const IndexProfile& profile);

/// Double-limit estimate: profiles at each aperture, verdict from the
/// smallest aperture, `aperture_stable` false when verdicts disagree.
IndexClass classify_order_index(const LevyMeasure& measure, int r,
                                const std::vector<double>& eps_list,
                                const std::vector<double>& apertures = {0.5, 0.25, 0.1},
                                int direction_count = 256);

IndexClass classify_lower_index(const LevyMeasure& measure, const std::vector<double>& eps_list,
                                int direction_count = 256);

/// Growth verdict shared by the cone-mass and non-degeneracy probes: the
/// sequence is nondecreasing, and its last entry is at least twice its first
/// positive entry (which must not be the last one).
bool diverges(const std::vector<double>& masses, double growth_factor = 2.0);

struct WideConeDirection {
    Vector axis;
    std::vector<double> masses;  // one per floor
    bool divergent = false;
};

struct WideConeReport {
    double aperture = 0.5;
    std::vector<double> floors;
    std::vector<WideConeDirection> directions;
    bool holds = false;
    std::optional<Vector> witness;  // a direction whose cone mass stays bounded
};

/// `growth_factor` is the "numerically infinite" bar passed to diverges().
WideConeReport wide_cone_check(const LevyMeasure& measure, double aperture,
                               int direction_count = 256,
                               std::vector<double> floors = {1e-2, 1e-4, 1e-6, 1e-8},
                               double growth_factor = 2.0);

struct MomentReport {
    bool first_moment_small_jumps = false;
    double first_moment_value = 0.0;
    std::vector<std::pair<double, bool>> big_jump_moments;
    std::vector<double> big_jump_values;
};

MomentReport moment_checks(const LevyMeasure& measure, const std::vector<double>& p_list);

}  // namespace levylab
