#include "levylab/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace levylab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

int sample_dim(const std::vector<Vector>& samples) {
    const int d = static_cast<int>(samples.front().size());
    check_dim(d);
    for (const auto& x : samples)
        if (x.size() != d) throw InvalidArgument("samples of mixed dimension");
    return d;
}

std::vector<double> axis_values(const std::vector<Vector>& samples, int axis) {
    std::vector<double> v(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) v[i] = samples[i](axis);
    return v;
}

double quantile_of(std::vector<double>& v, double q) {
    const auto k = static_cast<std::size_t>(std::clamp(q, 0.0, 1.0) * static_cast<double>(v.size() - 1));
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
    return v[k];
}

double standard_deviation(const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

// Multi-index stepping over a lattice, axis 0 fastest.
std::vector<std::size_t> strides_of(const Lattice& lat) {
    std::vector<std::size_t> s(lat.dim, 1);
    for (int j = 1; j < lat.dim; ++j) s[j] = s[j - 1] * static_cast<std::size_t>(lat.bins[j - 1]);
    return s;
}

// Gaussian convolution along one axis, kernel cut at 6h.
void convolve_axis(std::vector<double>& grid, const Lattice& lat, int axis, double h) {
    const double dx = lat.width(axis);
    const int radius = static_cast<int>(std::ceil(6.0 * h / dx));
    std::vector<double> kernel(2 * radius + 1);
    const double norm = 1.0 / (h * std::sqrt(2.0 * std::numbers::pi));
    for (int o = -radius; o <= radius; ++o) {
        const double z = o * dx / h;
        kernel[o + radius] = norm * std::exp(-0.5 * z * z);
    }
    const auto strides = strides_of(lat);
    const std::size_t stride = strides[axis];
    const int n = lat.bins[axis];
    const std::size_t lines = grid.size() / static_cast<std::size_t>(n);
    std::vector<double> in(n), out(n);
    for (std::size_t line = 0; line < lines; ++line) {
        // base index of this line: split `line` into the coordinates below and above `axis`
        const std::size_t below = line % stride;
        const std::size_t above = line / stride;
        const std::size_t base = below + above * stride * static_cast<std::size_t>(n);
        bool any = false;
        for (int i = 0; i < n; ++i) {
            in[i] = grid[base + static_cast<std::size_t>(i) * stride];
            any = any || in[i] != 0.0;
        }
        if (!any) continue;
        std::fill(out.begin(), out.end(), 0.0);
        for (int i = 0; i < n; ++i) {
            if (in[i] == 0.0) continue;
            const int lo = std::max(0, i - radius), hi = std::min(n - 1, i + radius);
            for (int j = lo; j <= hi; ++j) out[j] += in[i] * kernel[j - i + radius];
        }
        for (int i = 0; i < n; ++i) grid[base + static_cast<std::size_t>(i) * stride] = out[i];
    }
}

}  // namespace

std::size_t Lattice::size() const {
    std::size_t n = 1;
    for (int b : bins) n *= static_cast<std::size_t>(b);
    return n;
}

double Lattice::cell_volume() const {
    double v = 1.0;
    for (int j = 0; j < dim; ++j) v *= width(j);
    return v;
}

Vector Lattice::center(std::size_t i) const {
    Vector c(dim);
    for (int j = 0; j < dim; ++j) {
        const auto b = static_cast<std::size_t>(bins[j]);
        c(j) = lo[j] + (static_cast<double>(i % b) + 0.5) * width(j);
        i /= b;
    }
    return c;
}

std::string to_string(DensityKind kind) { return kind == DensityKind::Histogram ? "histogram" : "kde"; }

double DensityEstimate::mass() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s * lattice.cell_volume();
}

double DensityEstimate::max() const { return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end()); }

Vector silverman_bandwidth(const std::vector<Vector>& samples) {
    if (samples.size() < 2) throw TooFewSamples("bandwidth needs at least 2 samples");
    const int d = sample_dim(samples);
    const double n = static_cast<double>(samples.size());
    Vector h(d);
    for (int j = 0; j < d; ++j) {
        auto v = axis_values(samples, j);
        const double sd = standard_deviation(v);
        if (d == 1) {
            const double iqr = quantile_of(v, 0.75) - quantile_of(v, 0.25);
            const double s = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
            h(j) = 0.9 * s * std::pow(n, -0.2);
        } else {
            h(j) = sd * std::pow(4.0 / ((d + 2) * n), 1.0 / (d + 4));
        }
    }
    return h;
}

DensityEstimate density_estimate(const std::vector<Vector>& samples, const DensityOptions& options) {
    if (samples.size() < 100)
        throw TooFewSamples(std::to_string(samples.size()) + " samples, at least 100 needed");
    const int d = sample_dim(samples);
    const bool kde = options.kind == DensityKind::KDE;

    DensityEstimate est;
    est.kind = options.kind;
    est.sample_count = samples.size();
    if (kde) {
        est.bandwidth = options.bandwidth ? *options.bandwidth : silverman_bandwidth(samples);
        if (est.bandwidth.size() != d) throw InvalidArgument("bandwidth dimension mismatch");
        est.bandwidth *= options.bandwidth_scale;
        for (int j = 0; j < d; ++j)
            if (!(est.bandwidth(j) > 0.0) || !std::isfinite(est.bandwidth(j)))
                throw InvalidArgument("bandwidth must be positive; zero spread needs an explicit bandwidth");
    }

    Lattice& lat = est.lattice;
    lat.dim = d;
    lat.lo.resize(d);
    lat.hi.resize(d);
    lat.bins.resize(d);
    for (int j = 0; j < d; ++j) {
        double lo, hi;
        if (options.lo && options.hi) {
            lo = (*options.lo)(j);
            hi = (*options.hi)(j);
        } else {
            auto v = axis_values(samples, j);
            lo = quantile_of(v, options.quantile);
            hi = quantile_of(v, 1.0 - options.quantile);
            if (kde) {
                lo -= 4.0 * est.bandwidth(j);
                hi += 4.0 * est.bandwidth(j);
            } else if (hi == lo) {
                lo -= 0.5;
                hi += 0.5;
            } else {
                hi = std::nextafter(hi, kInf);
            }
        }
        if (!(hi > lo)) throw InvalidArgument("empty density range");
        int bins = std::max(options.bins, 1);
        if (kde) {
            const double needed = std::ceil((hi - lo) / (0.25 * est.bandwidth(j)));
            if (needed > static_cast<double>(options.max_cells))
                throw InvalidArgument("KDE lattice too fine for the sample range; narrow the range");
            bins = std::max(bins, static_cast<int>(needed));
        }
        lat.lo[j] = lo;
        lat.hi[j] = hi;
        lat.bins[j] = bins;
    }
    if (static_cast<double>(lat.size()) > static_cast<double>(options.max_cells))
        throw InvalidArgument("density lattice exceeds max_cells");

    const auto strides = strides_of(lat);
    std::vector<double> grid(lat.size(), 0.0);
    if (!kde) {
        for (const auto& x : samples) {
            std::size_t idx = 0;
            bool inside = true;
            for (int j = 0; j < d && inside; ++j) {
                const double f = (x(j) - lat.lo[j]) / lat.width(j);
                if (f < 0.0 || x(j) > lat.hi[j]) {
                    inside = false;
                    break;
                }
                const int i = std::min(static_cast<int>(f), lat.bins[j] - 1);
                idx += static_cast<std::size_t>(i) * strides[j];
            }
            if (inside) grid[idx] += 1.0;
        }
    } else {
        // linear binning onto cell centers; weight falling off the lattice is dropped
        std::vector<int> base(d);
        std::vector<double> frac(d);
        for (const auto& x : samples) {
            for (int j = 0; j < d; ++j) {
                const double f = (x(j) - lat.lo[j]) / lat.width(j) - 0.5;
                base[j] = static_cast<int>(std::floor(f));
                frac[j] = f - base[j];
            }
            for (int corner = 0; corner < (1 << d); ++corner) {
                double w = 1.0;
                std::size_t idx = 0;
                bool inside = true;
                for (int j = 0; j < d; ++j) {
                    const int up = (corner >> j) & 1;
                    const int i = base[j] + up;
                    if (i < 0 || i >= lat.bins[j]) {
                        inside = false;
                        break;
                    }
                    w *= up ? frac[j] : 1.0 - frac[j];
                    idx += static_cast<std::size_t>(i) * strides[j];
                }
                if (inside) grid[idx] += w;
            }
        }
        for (int j = 0; j < d; ++j) convolve_axis(grid, lat, j, est.bandwidth(j));
    }
    const double scale = kde ? 1.0 / static_cast<double>(samples.size())
                             : 1.0 / (static_cast<double>(samples.size()) * lat.cell_volume());
    for (double& v : grid) v = std::max(v * scale, 0.0);
    est.values = std::move(grid);
    return est;
}

DensityEstimate density_estimate(const std::vector<double>& samples, const DensityOptions& options) {
    std::vector<Vector> v;
    v.reserve(samples.size());
    for (double x : samples) v.push_back(Vector::Constant(1, x));
    return density_estimate(v, options);
}

double tv_distance(const DensityEstimate& a, const DensityEstimate& b) {
    if (!(a.lattice == b.lattice)) throw LatticeMismatch("estimates live on different lattices");
    double s = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) s += std::abs(a.values[i] - b.values[i]);
    return std::min(0.5 * s * a.lattice.cell_volume(), 1.0);
}

std::vector<CharProbe> char_function_probe(const std::vector<double>& samples, const std::vector<double>& z_list) {
    if (samples.empty()) throw TooFewSamples("no samples");
    const double n = static_cast<double>(samples.size());
    std::vector<CharProbe> out;
    out.reserve(z_list.size());
    for (double z : z_list) {
        if (!std::isfinite(z)) throw InvalidArgument("non-finite probe frequency");
        double c = 0.0, s = 0.0;
        for (double x : samples) {
            c += std::cos(z * x);
            s += std::sin(z * x);
        }
        CharProbe p;
        p.z = z;
        p.re = c / n;
        p.im = s / n;
        // rounding in the sums can push the modulus a few ulps above 1
        p.modulus = std::min(std::hypot(p.re, p.im), 1.0);
        p.se = 1.0 / std::sqrt(n);
        out.push_back(p);
    }
    return out;
}

std::vector<CharProbe> char_function_probe(const std::vector<Vector>& samples, const Vector& v,
                                           const std::vector<double>& z_list) {
    std::vector<double> proj;
    proj.reserve(samples.size());
    for (const auto& x : samples) {
        if (x.size() != v.size()) throw InvalidArgument("projection dimension mismatch");
        proj.push_back(x.dot(v));
    }
    return char_function_probe(proj, z_list);
}

std::vector<double> factorial_frequencies(int n_lo, int n_hi) {
    if (n_lo < 0 || n_hi > 8 || n_lo > n_hi) throw InvalidArgument("factorial probe needs 0 <= N_lo <= N_hi <= 8");
    std::vector<double> z;
    double f = 1.0;  // N!
    for (int n = 0; n <= n_hi; ++n) {
        if (n > 0) f *= n;
        if (n >= n_lo) z.push_back(2.0 * std::numbers::pi * f);
    }
    return z;
}

double smoothness_constant(int k, int m) {
    if (k < 0 || m < 1) throw InvalidArgument("c(k, m) needs k >= 0, m >= 1");
    const double e = std::numbers::e;
    return 2.0 * e / (e - 1.0) * (k * m + m * m + 2 * m - 2);
}

SmoothnessThreshold smoothness_threshold(int k, int m, int r, const IndexClass& rho_2r) {
    if (r < 1) throw InvalidArgument("r must be >= 1");
    SmoothnessThreshold out;
    out.k = k;
    out.m = m;
    out.r = r;
    out.c = smoothness_constant(k, m);
    const double e = std::numbers::e;
    switch (rho_2r.kind) {
    case IndexClass::Kind::Infinite:
        out.t_star = 0.0;
        if (m == 1 && r == 1) out.ladder = 0.0;
        break;
    case IndexClass::Kind::Finite:
        if (!(rho_2r.value > 0.0)) throw InvalidArgument("finite index must be positive");
        out.t_star = 2.0 * r * out.c / rho_2r.value;
        if (m == 1 && r == 1) out.ladder = 2.0 * e * (k + 1) / (rho_2r.value * (e - 1.0));
        break;
    case IndexClass::Kind::Zero:
        throw InvalidArgument("smoothness threshold needs rho_2r > 0");
    }
    return out;
}

namespace {

// t with t * index < numerator
double below(double numerator, const IndexClass& index) {
    switch (index.kind) {
    case IndexClass::Kind::Zero: return kInf;
    case IndexClass::Kind::Infinite: return 0.0;
    case IndexClass::Kind::Finite: break;
    }
    if (!(index.value > 0.0)) return kInf;
    return numerator / index.value;
}

bool straddles_zero(const IndexClass& index) {
    return index.kind == IndexClass::Kind::Finite && index.value - 2.0 * index.uncertainty <= 0.0;
}

}  // namespace

IrregularityThresholds irregularity_thresholds(const IndexClass& theta, const std::optional<IndexClass>& rho_1, int m,
                                               const std::vector<int>& r_list, const std::vector<int>& k_list) {
    if (m < 1) throw InvalidArgument("m must be >= 1");
    IrregularityThresholds out;
    out.irregular_for_all_t = theta.kind == IndexClass::Kind::Zero;
    for (int r : r_list) {
        if (r < 1) throw InvalidArgument("L_r needs r >= 1");
        out.no_Lr_below[r] = below(m * (1.0 - 1.0 / r), theta);
    }
    out.no_CB0_below = below(m, theta);
    if (rho_1 && m == 1) {
        for (int k : k_list) {
            if (k < 0) throw InvalidArgument("CB^k needs k >= 0");
            out.no_CBk_below[k] = below(k + 1.0, *rho_1);
        }
    }
    return out;
}

double cb_lower(const IrregularityThresholds& thresholds, int k) {
    double t = thresholds.no_CB0_below;
    if (auto it = thresholds.no_CBk_below.find(k); it != thresholds.no_CBk_below.end()) t = std::max(t, it->second);
    return t;
}

std::string to_string(Regime regime) {
    switch (regime) {
    case Regime::AbsolutelyContinuous: return "I";
    case Regime::StationarySmooth: return "II";
    case Regime::SmoothAllT: return "III.a";
    case Regime::Gradual: return "III.b";
    case Regime::Irregular: return "III.c";
    }
    return "?";
}

RegimeVerdict classify_regime(const RegimeInputs& in) {
    RegimeVerdict v;
    if (in.theta.kind == IndexClass::Kind::Zero) {
        v.regime = Regime::Irregular;
        v.reason = "theta = 0: no L_p,loc density for any t > 0";
        return v;
    }
    if (straddles_zero(in.theta)) throw Inconclusive("theta is within two uncertainties of zero");

    std::vector<int> pass = in.kr_pass;
    std::sort(pass.begin(), pass.end());
    pass.erase(std::unique(pass.begin(), pass.end()), pass.end());

    const bool stationary_row = in.wide_cone && !pass.empty() && in.dissipative;
    if (in.stationary && stationary_row) {
        v.regime = Regime::StationarySmooth;
        v.r = pass.front();
        v.reason = "K_r drift, wide cone and dissipative: smooth invariant density";
        return v;
    }

    std::optional<std::pair<int, double>> best;  // (r, t_smooth)
    for (int r : pass) {
        auto it = in.rho.find(2 * r);
        if (it == in.rho.end()) continue;
        const IndexClass& rho = it->second;
        if (!rho.aperture_stable) throw Inconclusive("rho_" + std::to_string(2 * r) + " unstable in the aperture limit");
        if (rho.kind == IndexClass::Kind::Infinite) {
            v.regime = Regime::SmoothAllT;
            v.r = r;
            v.reason = "a in K_" + std::to_string(r) + " and rho_" + std::to_string(2 * r) + " = inf";
            return v;
        }
        if (rho.kind == IndexClass::Kind::Finite) {
            if (straddles_zero(rho))
                throw Inconclusive("rho_" + std::to_string(2 * r) + " is within two uncertainties of zero");
            const double t = smoothness_threshold(in.k, in.m, r, rho).t_star;
            if (!best || t < best->second) best = {r, t};
        }
    }
    if (best) {
        std::optional<IndexClass> rho_1;
        if (auto it = in.rho.find(1); it != in.rho.end()) rho_1 = it->second;
        const auto irr = irregularity_thresholds(in.theta, rho_1, in.m, {}, {in.k});
        v.regime = Regime::Gradual;
        v.r = best->first;
        v.band = std::make_pair(cb_lower(irr, in.k), best->second);
        v.reason = "a in K_" + std::to_string(best->first) + " with finite rho_" + std::to_string(2 * best->first);
        return v;
    }
    if (stationary_row) {
        v.regime = Regime::StationarySmooth;
        v.r = pass.front();
        v.reason = "K_r drift, wide cone and dissipative: smooth invariant density";
        return v;
    }
    if (in.wide_cone && !pass.empty()) {
        v.regime = Regime::AbsolutelyContinuous;
        v.r = pass.front();
        v.reason = "K_r drift and wide cone: absolutely continuous for every t > 0";
        return v;
    }
    throw Inconclusive("no row of the decision table applies");
}

std::string to_string(TrendVerdict verdict) {
    switch (verdict) {
    case TrendVerdict::UnboundedLike: return "unbounded-like";
    case TrendVerdict::BoundedLike: return "bounded-like";
    case TrendVerdict::Inconclusive: return "inconclusive";
    }
    return "?";
}

TrendVerdict trend_verdict(const std::vector<double>& m) {
    if (m.size() != 3) throw InvalidArgument("trend verdict needs three maxima");
    if (m[1] > m[0] && m[2] > m[1] && m[2] >= 2.0 * m[0]) return TrendVerdict::UnboundedLike;
    if (std::abs(m[1] / m[0] - 1.0) <= 0.2 && std::abs(m[2] / m[0] - 1.0) <= 0.2) return TrendVerdict::BoundedLike;
    return TrendVerdict::Inconclusive;
}

TrendRow sup_density_trend(const std::vector<Vector>& samples, double t) {
    TrendRow row;
    row.t = t;
    const Vector h0 = silverman_bandwidth(samples);
    for (double s : {1.0, 0.5, 0.25}) {
        DensityOptions opt;
        opt.bandwidth = h0 * s;
        // the maximum sits in the bulk; far outliers would only inflate the lattice
        opt.quantile = 1e-3;
        const auto est = density_estimate(samples, opt);
        row.bandwidths.push_back(est.bandwidth(0));
        row.max_density.push_back(est.max());
    }
    row.verdict = trend_verdict(row.max_density);
    return row;
}

RegularityReport regularity_report(const std::string& scenario, const RegimeInputs& inputs,
                                   const std::vector<int>& k_list, const std::vector<int>& r_list) {
    RegularityReport rep;
    rep.scenario = scenario;
    rep.inputs = inputs;
    std::optional<IndexClass> rho_1;
    if (auto it = inputs.rho.find(1); it != inputs.rho.end()) rho_1 = it->second;
    const auto irr = irregularity_thresholds(inputs.theta, rho_1, inputs.m, r_list, k_list);
    rep.t_irregular = irr.no_Lr_below;
    for (int k : k_list) {
        rep.cb_lower[k] = cb_lower(irr, k);
        double best = kInf;
        for (int r : inputs.kr_pass) {
            auto it = inputs.rho.find(2 * r);
            if (it == inputs.rho.end() || it->second.kind == IndexClass::Kind::Zero) continue;
            if (it->second.kind == IndexClass::Kind::Finite && !(it->second.value > 0.0)) continue;
            best = std::min(best, smoothness_threshold(k, inputs.m, r, it->second).t_star);
        }
        if (std::isfinite(best)) rep.t_smooth[k] = best;
    }
    try {
        rep.regime = classify_regime(inputs);
    } catch (const Inconclusive& e) {
        rep.regime_error = e.what();
    }
    return rep;
}

}  // namespace levylab
