#pragma once

// Realizations of the Poisson point measure on a time window, restricted to
// marks with |u| >= eps_cut, and the cutoff decomposition of the Levy path
// U_t = U_0 + (jumps with |u| >= eps) - t M^eps.

#include "levylab/levy_measure.hpp"
#include "levylab/rng.hpp"
#include "levylab/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace levylab {

struct Event {
    double tau = 0.0;
    Vector u;
    /// Independent uniform coordinate on (0, 1); splits a mark set into
    /// sub-cells without changing the law of (tau, u).
    double aux = 0.5;
};

struct PointConfiguration {
    double t0 = 0.0;
    double t1 = 1.0;
    int dim = 1;
    std::vector<Event> events;  // strictly increasing tau in [t0, t1)
    double eps_cut = 1.0;
    std::uint64_t seed = 0;
    std::uint64_t replica = 0;

    /// Checks the ordering, window and cutoff invariants; throws InvalidArgument.
    void validate() const;
};

enum class SmallJumpMode { Drop, GaussianMatch };
/// LevyKhintchine subtracts t M^eps (compensated small jumps); None leaves the
/// jump sum uncompensated (finite-activity noise such as a Poisson process).
enum class Compensation { LevyKhintchine, None };

std::string to_string(SmallJumpMode mode);
std::string to_string(Compensation c);

struct CutoffScheme {
    double eps_cut = 1.0;
    SmallJumpMode mode = SmallJumpMode::Drop;
    Compensation compensation = Compensation::LevyKhintchine;
    Vector compensator;               // M^eps, zero under Compensation::None
    std::optional<Matrix> covariance; // int_{|u| < eps} u u^T Pi(du) for GaussianMatch

    static CutoffScheme make(const LevyMeasure& measure, double eps_cut,
                             SmallJumpMode mode = SmallJumpMode::Drop,
                             Compensation compensation = Compensation::LevyKhintchine);
};

/// M^eps = int_{eps <= |u| <= 1} u Pi(du).
Vector compensator_drift(const LevyMeasure& measure, double eps_cut);

/// Largest eps in (0, 1] whose retained rate Pi(|u| >= eps) stays <= max_rate,
/// never below the smallest retained atom.
double default_eps_cut(const LevyMeasure& measure, double max_rate = 1e4);

/// Vose alias table for O(1) draws from a finite discrete law.
class AliasTable {
public:
    AliasTable() = default;
    explicit AliasTable(const std::vector<double>& weights);
    template <typename Engine>
    std::size_t operator()(Engine& engine) const {
        const double x = uniform_open01(engine) * static_cast<double>(prob_.size());
        const auto i = std::min(static_cast<std::size_t>(x), prob_.size() - 1);
        return (x - static_cast<double>(i)) < prob_[i] ? i : alias_[i];
    }
    std::size_t size() const { return prob_.size(); }

private:
    std::vector<double> prob_;
    std::vector<std::size_t> alias_;
};

/// Inverse CDF of pi restricted to [floor, rho_max) on 4096 log-spaced knots
/// with a local power law inside each cell and a Pareto tail past the last knot.
class RadialSampler {
public:
    RadialSampler(const RadialProfile& profile, double floor);
    double mass() const { return total_; }
    double quantile(double p) const;

private:
    std::vector<double> knots_;  // radii
    std::vector<double> cum_;    // mass below knots_[k]
    std::vector<double> slope_;  // local exponent beta: pi ~ rho^{-beta} in cell k
    double tail_ = 0.0;
    double tail_beta_ = 2.0;
    double total_ = 0.0;
};

using Engine = Philox4x32;

/// Mark law Pi restricted to |u| >= eps_cut and normalized, built once per
/// (measure, eps_cut).
class ConfigurationSampler {
public:
    ConfigurationSampler(const LevyMeasure& measure, double eps_cut, double event_budget = 1e7);

    double rate() const { return rate_; }
    double eps_cut() const { return eps_cut_; }
    int dim() const { return dim_; }

    template <typename Eng>
    void draw_mark(Eng& engine, Vector& out) const {
        const std::size_t k = alias_(engine);
        const Piece& p = pieces_[k];
        if (p.radial < 0) {
            out = p.location;
        } else {
            out = radial_[p.radial].quantile(uniform_open01(engine)) * p.location;
        }
    }

    /// Replica `replica` of a run keyed by `seed`.
    PointConfiguration sample(double t0, double t1, std::uint64_t seed, std::uint64_t replica) const;
    PointConfiguration sample(double t0, double t1, Engine& engine) const;

private:
    struct Piece {
        Vector location;  // atom location, or ray direction
        int radial = -1;  // index into radial_ for rays
    };
    int dim_ = 1;
    double eps_cut_ = 1.0;
    double rate_ = 0.0;
    double budget_ = 1e7;
    std::vector<Piece> pieces_;
    std::vector<RadialSampler> radial_;
    AliasTable alias_;
};

PointConfiguration sample_configuration(const LevyMeasure& measure, double t0, double t1, double eps_cut,
                                        std::uint64_t seed, std::uint64_t replica = 0);

/// U_t - U_{t0} at each requested time (cadlag: a jump at t is included).
/// GaussianMatch draws its Brownian substitute from a stream derived from the
/// configuration seed, so the evaluation is still deterministic.
std::vector<Vector> evaluate_levy_path(const PointConfiguration& config, const CutoffScheme& scheme,
                                       const std::vector<double>& times);

/// Binary dump: "LVYPCFG1", u32 version, u32 dim, f64 t0, f64 t1, f64 eps_cut,
/// u64 seed, u64 count, u32 flags (bit 0: aux present), u32 reserved, then
/// per event little-endian f64 tau, u_1..u_m and aux when flagged.
void write_configuration(std::ostream& os, const PointConfiguration& config, bool with_aux = true);
PointConfiguration read_configuration(std::istream& is);

}  // namespace levylab
