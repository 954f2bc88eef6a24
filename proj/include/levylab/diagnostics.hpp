#pragma once

// Sample-based regularity evidence (density estimates, empirical
// characteristic functions, sup-density trends) and the closed-form
// smoothness / irregularity thresholds with the regime decision table.

#include "levylab/levy_measure.hpp"
#include "levylab/types.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace levylab {

/// Regular cell-centered lattice on a box; values live at cell centers.
struct Lattice {
    int dim = 1;
    std::vector<double> lo, hi;
    std::vector<int> bins;

    std::size_t size() const;
    double width(int axis) const { return (hi[axis] - lo[axis]) / bins[axis]; }
    double cell_volume() const;
    /// Center of the cell with flat index i (axis 0 fastest).
    Vector center(std::size_t i) const;
    bool operator==(const Lattice&) const = default;
};

enum class DensityKind { Histogram, KDE };

std::string to_string(DensityKind kind);

struct DensityOptions {
    DensityKind kind = DensityKind::KDE;
    int bins = 256;                       // per axis; KDE refines so that width <= bandwidth / 4
    std::optional<Vector> lo, hi;         // default: sample range (+ 4 bandwidths for KDE)
    double quantile = 0.0;                // default range from the [q, 1 - q] quantiles instead
    std::optional<Vector> bandwidth;      // default: Silverman
    double bandwidth_scale = 1.0;
    std::size_t max_cells = 1 << 24;
};

struct DensityEstimate {
    DensityKind kind = DensityKind::KDE;
    Lattice lattice;
    Vector bandwidth;  // empty for histograms
    std::size_t sample_count = 0;
    std::vector<double> values;

    double mass() const;
    double max() const;
};

/// Silverman's rule: 0.9 min(sd, IQR/1.34) n^{-1/5} in one dimension, the
/// normal-reference sd_j (4 / ((d + 2) n))^{1/(d+4)} per axis otherwise.
Vector silverman_bandwidth(const std::vector<Vector>& samples);

/// Histogram counts / (n * cell volume), or a Gaussian product-kernel KDE
/// computed by linear binning and separable convolution (kernel cut at 6h).
/// Throws TooFewSamples below 100 samples.
DensityEstimate density_estimate(const std::vector<Vector>& samples, const DensityOptions& options = {});
DensityEstimate density_estimate(const std::vector<double>& samples, const DensityOptions& options = {});

/// 1/2 sum |p1 - p2| * cell volume; throws LatticeMismatch unless the lattices agree exactly.
double tv_distance(const DensityEstimate& a, const DensityEstimate& b);

struct CharProbe {
    double z = 0.0;
    double re = 0.0, im = 0.0;
    double modulus = 0.0;
    double se = 0.0;  // n^{-1/2}
};

std::vector<CharProbe> char_function_probe(const std::vector<double>& samples, const std::vector<double>& z_list);
/// Probe of the projection (X, v).
std::vector<CharProbe> char_function_probe(const std::vector<Vector>& samples, const Vector& v,
                                           const std::vector<double>& z_list);

/// 2 pi N! for N in [n_lo, n_hi]; N above 8 is rejected.
std::vector<double> factorial_frequencies(int n_lo, int n_hi);

/// c(k, m) = 2e/(e-1) (k m + m^2 + 2m - 2).
double smoothness_constant(int k, int m);

struct SmoothnessThreshold {
    int k = 0, m = 1, r = 1;
    double c = 0.0;
    double t_star = 0.0;           // 0 when rho_2r is infinite
    std::optional<double> ladder;  // a_k = 2e(k+1) / (rho (e-1)), for m = r = 1
};

/// t* = 2 r c(k, m) / rho_2r. rho_2r must be Finite (positive) or Infinite.
SmoothnessThreshold smoothness_threshold(int k, int m, int r, const IndexClass& rho_2r);

struct IrregularityThresholds {
    std::map<int, double> no_Lr_below;  // m (1 - 1/r) / theta
    double no_CB0_below = 0.0;          // m / theta
    std::map<int, double> no_CBk_below; // (k + 1) / rho_1
    bool irregular_for_all_t = false;   // theta = 0
};

/// theta Zero gives +inf everywhere; Infinite gives 0. The rho_1 thresholds
/// are one-dimensional and skipped for m > 1.
IrregularityThresholds irregularity_thresholds(const IndexClass& theta, const std::optional<IndexClass>& rho_1, int m,
                                               const std::vector<int>& r_list, const std::vector<int>& k_list);

/// Lower end of the no-CB^k range: max(m / theta, (k + 1) / rho_1), since
/// CB^k lies inside CB^0.
double cb_lower(const IrregularityThresholds& thresholds, int k);

enum class Regime { AbsolutelyContinuous, StationarySmooth, SmoothAllT, Gradual, Irregular };

/// "I", "II", "III.a", "III.b", "III.c"
std::string to_string(Regime regime);

struct RegimeInputs {
    int m = 1;
    int k = 0;                        // smoothness order asked about in III.b
    std::vector<int> kr_pass;         // r with a sampled K_r certificate
    std::map<int, IndexClass> rho;    // rho_s keyed by s (rho_{2r} under key 2r)
    IndexClass theta;
    bool wide_cone = false;
    bool dissipative = false;
    bool stationary = false;          // ask about the invariant law first (row II before III.a/b)
};

struct RegimeVerdict {
    Regime regime = Regime::AbsolutelyContinuous;
    std::optional<std::pair<double, double>> band;  // [no_CBk_below, t_smooth(k)] for III.b
    int r = 0;                                      // the K_r order used for III.a/b
    std::string reason;
};

/// First matching row: theta = 0 -> III.c; K_r with rho_2r infinite -> III.a;
/// K_r with rho_2r finite -> III.b; wide cone + K_r + dissipative -> II;
/// wide cone + K_r -> I. The III.b band starts at cb_lower(k), reading rho_1
/// from inputs.rho[1] when m = 1. Throws Inconclusive when a deciding index
/// is within two uncertainties of zero, its aperture limit is unstable, or
/// no row applies.
RegimeVerdict classify_regime(const RegimeInputs& inputs);

enum class TrendVerdict { UnboundedLike, BoundedLike, Inconclusive };

std::string to_string(TrendVerdict verdict);

struct TrendRow {
    double t = 0.0;
    std::vector<double> bandwidths;  // Silverman x {1, 1/2, 1/4}
    std::vector<double> max_density;
    TrendVerdict verdict = TrendVerdict::Inconclusive;
};

/// Unbounded-like when the max KDE grows at each halving and by at least 2x
/// over both; bounded-like when all three maxima lie within 20% of the first.
TrendVerdict trend_verdict(const std::vector<double>& max_density);

TrendRow sup_density_trend(const std::vector<Vector>& samples, double t);

struct RegularityReport {
    std::string scenario;
    RegimeInputs inputs;
    std::map<int, double> t_smooth;     // by k
    std::map<int, double> t_irregular;  // no_Lr_below by r
    std::map<int, double> cb_lower;     // by k
    std::optional<RegimeVerdict> regime;
    std::string regime_error;           // set when classification was inconclusive
    std::vector<TrendRow> trend;
    std::vector<CharProbe> char_probe;
};

/// Thresholds and regime from the index inputs; the empirical tables are left empty.
RegularityReport regularity_report(const std::string& scenario, const RegimeInputs& inputs,
                                   const std::vector<int>& k_list, const std::vector<int>& r_list);

}  // namespace levylab
