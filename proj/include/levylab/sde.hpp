#pragma once

// The jump SDE X(t) = x + int_0^t a(X) ds + U_t - U_0 on one configuration,
// its stochastic exponent, the derivative process along a time stretch and
// the Malliavin matrix of a differential grid.

#include "levylab/drift.hpp"
#include "levylab/point_measure.hpp"
#include "levylab/variations.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace levylab {

enum class Integrator {
    RK4,          // classical RK4 between jumps
    ExactLinear,  // matrix exponential of the affine flow; linear drifts only
};

std::string to_string(Integrator method);

struct JumpRecord {
    std::size_t event = 0;  // index into config.events
    std::size_t grid = 0;   // index of tau in PathRecord::times
    double tau = 0.0;
    Vector before;          // X(tau-)
    Vector after;           // X(tau) = X(tau-) + u
};

/// Determinant and norm sandwich for the exponent along one path, with
/// C = sup |grad a| over the visited states.
struct ExponentBounds {
    double C = 0.0;
    double horizon = 0.0;
    double min_log_det_margin = 0.0;  // min_t ln det E_t + m t C  (>= 0 expected)
    double min_norm_margin = 0.0;     // min over t of the four sandwich margins in log scale
    bool holds = false;
};

struct PathRecord {
    int dim = 1;
    std::vector<double> times;   // steps of `step`, restarted at every jump time
    std::vector<Vector> states;  // cadlag X(t_k)
    std::vector<JumpRecord> jumps;
    std::vector<Matrix> exponent;          // E_{t_k}, filled by stochastic_exponent
    std::vector<Matrix> exponent_inverse;  // E_{t_k}^{-1}
    std::optional<ExponentBounds> bounds;
    double step = 1e-3;
    Integrator method = Integrator::RK4;
    PointConfiguration config;
    CutoffScheme scheme;

    const Vector& end_state() const { return states.back(); }
    /// X(t) on the stored grid (cadlag; t between grid points takes the left one).
    const Vector& state_at(double t) const;
    std::size_t index_at(double t) const;
};

/// Solves on [config.t0, config.t1] with drift a(x) - M^eps between jumps and
/// exact jump application. Throws BlowUp when |X| exceeds 1e12.
PathRecord solve_path(const DriftField& a, const PointConfiguration& config, const CutoffScheme& scheme,
                      const Vector& x0, double step = 1e-3, Integrator method = Integrator::RK4);

/// Fills path.exponent / exponent_inverse by matrix RK4 of E' = grad a(X) E and
/// (E^{-1})' = -E^{-1} grad a(X) along the path, then checks the exponent
/// bounds. Throws IllConditioned when |E E^{-1} - I| > 1e-6.
void stochastic_exponent(PathRecord& path, const DriftField& a);

ExponentBounds exponent_bounds(const PathRecord& path, const DriftField& a);

/// Y(t) = E_t sum_{tau <= t, u in gamma} Jh(tau) E_tau^{-1} Delta(X(tau-), u);
/// t must be a grid time (the end of the window by default).
Vector derivative_process(const PathRecord& path, const DriftField& a, const TimeStretch& stretch,
                          const MarkSet& gamma, std::optional<double> t = std::nullopt);

struct GridDerivative {
    std::vector<GridCell> cells;  // cells holding at least one event before t
    std::vector<Vector> g;        // derivative of X(t) along each cell
    Matrix sigma;
    double lambda_min = 0.0;
    bool nondegenerate = false;   // lambda_min > 1e-10
};

/// Sigma = sum_i g_i g_i^T over the grid cells met by the configuration.
GridDerivative malliavin_matrix(const PathRecord& path, const DriftField& a, const DifferentialGrid& grid,
                                std::optional<double> t = std::nullopt);

/// X(t1) for a linear drift, without a time grid:
/// e^{(t1-t0)A} x0 + sum e^{(t1-tau)A} u - int_0^{t1-t0} e^{sA} ds M^eps.
/// Drop mode only.
Vector linear_endpoint(const Matrix& A, const PointConfiguration& config, const CutoffScheme& scheme,
                       const Vector& x0);

struct EndpointOptions {
    double step = 1e-3;
    int jobs = 1;
    double event_budget = 1e7;
};

/// X(t) for replicas [first, first + count) of a run keyed by `seed`; linear
/// drifts in Drop mode use linear_endpoint, everything else solve_path.
std::vector<Vector> sample_endpoints(const DriftField& a, const LevyMeasure& measure, const CutoffScheme& scheme,
                                     const Vector& x0, double t, std::uint64_t seed, std::size_t count,
                                     const EndpointOptions& options = {}, std::uint64_t first = 0);

struct StationarySamples {
    std::vector<Vector> samples;
    double burn_in = 0.0;
    std::vector<std::string> warnings;
};

/// Endpoints after burn-in from x0 = 0; burn-in defaults to 20 / gamma from
/// dissipativity_check (radius 1). A non-dissipative drift is only warned about.
StationarySamples stationary_sample(const DriftField& a, const LevyMeasure& measure, const CutoffScheme& scheme,
                                    std::size_t n_samples, std::uint64_t seed,
                                    std::optional<double> burn_in = std::nullopt, const EndpointOptions& options = {});

/// CSV columns: t, X1..Xm, jump (1 at jump times).
void write_path_csv(std::ostream& os, const PathRecord& path);

}  // namespace levylab
