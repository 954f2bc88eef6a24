#pragma once

// Time-stretching calculus on point configurations: the flow T_h of
// z' = Jh(z), transformed configurations, admissibility densities,
// differential grids and finite-difference directional derivatives.

#include "levylab/levy_measure.hpp"
#include "levylab/point_measure.hpp"
#include "levylab/types.hpp"

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace levylab {

/// Bounded, compactly supported h on [0, inf) with its running integral
/// Jh(x) = int_0^x h. Builtin shapes carry closed-form Jh.
class TimeStretch {
public:
    enum class Shape { Zero, Indicator, GridBump, SineBump, Tabulated };

    static TimeStretch zero();
    /// h = c on [a, b).
    static TimeStretch indicator(double a, double b, double c = 1.0);
    /// Jh rises 0 -> height on (a, a+beta) along a C-infinity smoothstep,
    /// equals height on [a+beta, b-beta] and falls back to 0 on (b-beta, b).
    static TimeStretch grid_bump(double a, double b, double beta, double height = 1.0);
    /// h = amp sin(2 pi (x-a)/(b-a)) on [a, b]; Jh >= 0 vanishes at a and b.
    static TimeStretch sine_bump(double a, double b, double amp = 1.0);
    /// Piecewise-linear h through (x_k, h_k), zero outside [x_0, x_K].
    static TimeStretch tabulated(std::vector<double> xs, std::vector<double> hs);

    Shape shape() const { return shape_; }
    double h(double x) const;
    double Jh(double x) const;
    /// Support [s0, s1] of h.
    double s0() const { return s0_; }
    double s1() const { return s1_; }
    /// Jh(x) for x >= s1.
    double J_infinity() const { return Jh(s1_); }
    /// Jh vanishes outside (s0, s1) and is positive inside.
    bool grid_compatible() const;
    TimeStretch scaled(double factor) const;
    std::string describe() const;

private:
    Shape shape_ = Shape::Zero;
    double a_ = 0.0, b_ = 0.0, p_ = 0.0;  // shape parameters
    double scale_ = 1.0;
    double s0_ = 0.0, s1_ = 0.0;
    std::vector<double> xs_, hs_, cum_;
};

/// C-infinity smoothstep S(x) = f(x) / (f(x) + f(1-x)), f(x) = exp(-1/x), and S'.
double smoothstep(double x);
double smoothstep_derivative(double x);

/// T_{scale h} x = z(1) for z' = scale * Jh(z), z(0) = x; classical RK4, step 1e-4.
double time_stretch_map(const TimeStretch& stretch, double scale, double x);

/// r(t) = ln d/dt T_{scale h} t = int_0^1 scale h(T_{s scale h} t) ds, via the
/// flow identity d/dt T t = Jh(T t) / Jh(t) (and e^{scale h(t)} at zeros of Jh).
double stretch_rate(const TimeStretch& stretch, double t, double scale = 1.0);

/// The same integral by 64-point Gauss-Legendre along one RK4 trajectory
/// (accurate for continuous h; used as an independent check).
double stretch_rate_quadrature(const TimeStretch& stretch, double t, double scale = 1.0);

/// lim_{t -> inf} (T_{scale h} t - t), evaluated past the support.
double stretch_offset(const TimeStretch& stretch, double scale = 1.0);

/// Cached flow x -> T_{scale h} x: cubic Hermite interpolation with the exact
/// slope Jh(T x)/Jh(x) on knots placed by bisection until the midpoint error is
/// below `tol`; knot values come from an error-controlled Dormand-Prince solve.
/// Closed forms outside the region the orbit can reach.
class StretchFlow {
public:
    StretchFlow(const TimeStretch& stretch, double scale, double tol = 1e-11);
    double operator()(double x) const;
    double rate(double x) const;
    const TimeStretch& stretch() const { return stretch_; }
    double scale() const { return scale_; }
    std::size_t knot_count() const { return x_.size(); }

private:
    double slope_at(double x, double tx) const;

    TimeStretch stretch_;
    double scale_;
    double lo_ = 0.0, hi_ = 0.0;
    std::vector<double> x_, t_, dt_;
};

/// Membership test for a mark set; the auxiliary coordinate lets grid cells
/// split an annulus into sub-cells.
using MarkSet = std::function<bool(const Vector& u, double aux)>;

MarkSet all_marks();
MarkSet norm_band(double lo, double hi);

/// Events with marks in `gamma` move to T_{-scale h} tau; the rest stay.
PointConfiguration transform_configuration(const PointConfiguration& config, const TimeStretch& stretch,
                                           const MarkSet& gamma, double scale = 1.0);
/// Same with a cached flow of T_{-scale h}.
PointConfiguration transform_configuration(const PointConfiguration& config, const StretchFlow& backward,
                                           const MarkSet& gamma);

/// p = exp{ sum_{events in gamma} r(tau) - c_inf * Pi(gamma) } for the stretch scale * h.
double admissibility_density(const PointConfiguration& config, const TimeStretch& stretch, const MarkSet& gamma,
                             double pi_gamma, double scale = 1.0);
double admissibility_density(const PointConfiguration& config, const StretchFlow& forward, const MarkSet& gamma,
                             double pi_gamma);

struct Annulus {
    long long n = 0;
    double eps_hi = 1.0;  // eps_n
    double eps_lo = 0.5;  // eps_{n+1}
    double mass = 0.0;    // Pi(I_n)
    double K = 2.0;       // number of mark sub-cells
};

struct GridCell {
    long long annulus = 0;
    double sub = 0.0;  // sub-cell index in [0, K)
    double a = 0.0, b = 1.0;
    double norm_lo = 0.0, norm_hi = 1.0;
    double aux_lo = 0.0, aux_hi = 1.0;
    double height = 1.0;  // min(1/eps_n, 1)

    bool contains(double tau, const Vector& u, double aux) const;
    bool operator==(const GridCell& o) const { return annulus == o.annulus && sub == o.sub; }
};

/// eps_n = 1/(n+1) for n >= 0 and (|n|+2)/2 for n < 0.
double grid_eps(long long n);
/// n with |u| in [eps_{n+1}, eps_n).
long long annulus_index(double norm);

class DifferentialGrid {
public:
    DifferentialGrid(const LevyMeasure& measure, double t, double B, double gamma, double beta,
                     double eps_floor = 1e-3);

    double horizon() const { return t_; }
    double B() const { return B_; }
    double gamma() const { return gamma_; }
    double beta() const { return beta_; }
    /// Annuli with nonzero mass between the largest mark and eps_floor.
    const std::vector<Annulus>& annuli() const { return annuli_; }
    Annulus annulus(long long n) const;
    /// sum over the tabulated annuli of t^2 Pi^2(I_n) / (2 K_n); < gamma by construction.
    double summed_bound() const { return summed_; }

    std::optional<GridCell> cell_of(double tau, const Vector& u, double aux) const;
    /// Stretch of a cell: height * bump with Jh = 1 on (beta, t - beta).
    TimeStretch stretch(const GridCell& cell) const;
    MarkSet mark_set(const GridCell& cell) const;
    /// Cells of the tabulated annuli with at most `max_sub` sub-cells each (for predicate checks).
    std::vector<GridCell> cells(long long max_sub = 64) const;

private:
    Annulus make_annulus(long long n, double mass) const;

    LevyMeasure measure_;
    double t_, B_, gamma_, beta_;
    std::vector<Annulus> annuli_;
    double summed_ = 0.0;
};

/// Disjointness of two cells as subsets of time x marks x aux.
bool cells_disjoint(const GridCell& a, const GridCell& b);

using ConfigFunctional = std::function<Vector(const PointConfiguration&)>;

struct FiniteDifference {
    std::vector<double> eps;
    std::vector<Vector> forward;  // (F(T_{eps h} nu) - F(nu)) / eps
    std::vector<Vector> central;  // (F(T_{eps h} nu) - F(T_{-eps h} nu)) / (2 eps)
    /// (q D(eps_k) - D(eps_{k-1})) / (q - 1) with q = eps_{k-1}/eps_k at the two finest steps.
    Vector richardson;
    /// Observed order of the forward differences from their successive increments.
    double slope = 0.0;
};

/// Directional derivative of F along (h, gamma). Throws NonConvergent when
/// the two finest central estimates differ by more than `tol` (relative).
FiniteDifference finite_diff_derivative(const ConfigFunctional& f, const PointConfiguration& config,
                                        const TimeStretch& stretch, const MarkSet& gamma,
                                        std::vector<double> eps_list = {1e-2, 1e-3, 1e-4}, double tol = 1e-2);

/// Order of convergence from errors e_i at steps eps_i: least-squares slope of
/// ln e against ln eps.
double convergence_slope(const std::vector<double>& eps, const std::vector<double>& errors);

}  // namespace levylab
