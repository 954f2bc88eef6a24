#include "levylab/drift.hpp"

#include "levylab/directions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace levylab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Test points of the cone V(w, aperture): n_rays unit rays alternating between
// the two nappes, opening from the axis to the cone boundary.
std::vector<Vector> cone_rays(const Vector& w, double aperture, int n_rays) {
    const int dim = static_cast<int>(w.size());
    std::vector<Vector> rays;
    if (dim == 1) {
        rays.push_back(w);
        rays.push_back(-w);
        return rays;
    }
    const auto lattice = direction_grid(dim, std::max(n_rays, 2));
    const double theta_max = std::acos(aperture) * (1.0 - 1e-9);
    const int per_side = std::max(1, n_rays / 2);
    for (int j = 0; j < n_rays; ++j) {
        const double side = (j % 2) ? -1.0 : 1.0;
        const int step = j / 2;
        const double theta = per_side > 1 ? theta_max * step / (per_side - 1) : 0.0;
        Vector p = lattice[j % lattice.size()];
        p -= p.dot(w) * w;
        for (int k = 0; p.norm() < 1e-8 && k < dim; ++k) {
            p = unit_vector<double>(dim, k);
            p -= p.dot(w) * w;
        }
        p.normalize();
        rays.push_back(side * (std::cos(theta) * w + std::sin(theta) * p));
    }
    return rays;
}

}  // namespace

std::string to_string(DriftKind kind) {
    switch (kind) {
        case DriftKind::Linear: return "Linear";
        case DriftKind::NegIdentity: return "NegIdentity";
        case DriftKind::Polynomial1D: return "Polynomial1D";
        case DriftKind::Custom: return "Custom";
    }
    return "?";
}

std::vector<Vector> sample_box(int dim, double half_width, int count) {
    std::vector<Vector> out;
    out.push_back(Vector::Zero(dim));
    for (int k = 1; k < count; ++k)
        out.push_back(half_width * (2.0 * halton_point(dim, static_cast<std::uint64_t>(k) + 1) -
                                    Vector::Ones(dim)));
    return out;
}

double gradient_consistency(const DriftField& a, int count) {
    double worst = 0.0;
    const double h = 1e-6;
    for (const auto& x : sample_box(a.dim(), 2.0, count)) {
        const Matrix J = a.gradient(x);
        Matrix fd(a.dim(), a.dim());
        for (int j = 0; j < a.dim(); ++j) {
            Vector xp = x, xm = x;
            xp(j) += h;
            xm(j) -= h;
            fd.col(j) = (a(xp) - a(xm)) / (2.0 * h);
        }
        const double scale = std::max({J.norm(), fd.norm(), 1e-3});
        worst = std::max(worst, (J - fd).norm() / scale);
    }
    return worst;
}

double linear_growth_constant(const DriftField& a, double half_width, int count) {
    double K = 0.0;
    for (const auto& x : sample_box(a.dim(), half_width, count))
        K = std::max(K, a(x).squaredNorm() / (1.0 + x.squaredNorm()));
    return K;
}

KrCertificate k_r_certificate(const DriftField& a, int r, double aperture, const KrOptions& opt) {
    if (r < 1) throw InvalidArgument("K_r certificate needs r >= 1");
    check_aperture(aperture);
    if (!(opt.d_search > 1e-6)) throw InvalidArgument("search radius must exceed 1e-6");
    const int dim = a.dim();

    KrCertificate out;
    out.r = r;
    out.aperture = aperture;
    out.xs = sample_box(dim, opt.half_width, opt.n_x);

    std::vector<double> radii;
    for (int k = 0; k < opt.n_radii; ++k)
        radii.push_back(opt.n_radii == 1 ? opt.d_search
                                         : opt.d_search * std::pow(1e-6 / opt.d_search,
                                                                   static_cast<double>(k) / (opt.n_radii - 1)));
    const auto ws = direction_grid(dim, opt.w_directions, true);
    const auto base_vs = direction_grid(dim, opt.n_v, true);

    struct Probe {
        Vector y;
        double denom;
    };
    std::vector<std::vector<Probe>> probes(ws.size());
    for (std::size_t iw = 0; iw < ws.size(); ++iw)
        for (const auto& ray : cone_rays(ws[iw], aperture, opt.n_rays))
            for (double rho : radii) {
                const Vector y = rho * ray;
                probes[iw].push_back({y, std::pow(std::abs(y.dot(ws[iw])), r)});
            }

    out.D = kInf;
    for (std::size_t ix = 0; ix < out.xs.size(); ++ix) {
        const Vector& x = out.xs[ix];
        std::vector<Vector> vs = base_vs;
        Eigen::JacobiSVD<Matrix> svd(a.gradient(x), Eigen::ComputeFullU);
        const double sigma_min = svd.singularValues()(dim - 1);
        vs.push_back(svd.matrixU().col(dim - 1));
        if (sigma_min < 1e-8)
            out.warnings.push_back("DegenerateGradient at sample " + std::to_string(ix) +
                                   " (smallest singular value " + std::to_string(sigma_min) + ")");

        std::vector<double> best(vs.size(), -1.0);
        std::vector<std::size_t> best_w(vs.size(), 0);
        std::vector<Vector> deltas;
        for (std::size_t iw = 0; iw < ws.size(); ++iw) {
            deltas.clear();
            for (const auto& p : probes[iw]) deltas.push_back(a.delta(x, p.y));
            for (std::size_t iv = 0; iv < vs.size(); ++iv) {
                double worst = kInf;
                for (std::size_t k = 0; k < deltas.size() && worst > best[iv]; ++k)
                    worst = std::min(worst, std::abs(deltas[k].dot(vs[iv])) / probes[iw][k].denom);
                if (worst > best[iv]) {
                    best[iv] = worst;
                    best_w[iv] = iw;
                }
            }
        }
        for (std::size_t iv = 0; iv < vs.size(); ++iv) {
            out.witnesses.push_back({static_cast<int>(ix), vs[iv], ws[best_w[iv]], best[iv]});
            out.D = std::min(out.D, best[iv]);
        }
    }
    out.pass = out.D > 1e-8;
    return out;
}

NondegeneracyTrend nondegeneracy_trend(const DriftField& a, const LevyMeasure& measure, const Vector& x,
                                       const std::vector<Vector>& v_grid, std::vector<double> n_list,
                                       double tol) {
    if (!(tol > 0.0)) throw InvalidArgument("tolerance must be positive");
    if (measure.dim() != a.dim() || x.size() != a.dim())
        throw InvalidArgument("drift, measure and point dimensions differ");
    std::sort(n_list.begin(), n_list.end());
    NondegeneracyTrend out;
    out.n_list = n_list;
    out.tol = tol;
    out.divergent = !v_grid.empty();
    const double rho_lo = 1.0 / n_list.back();

    for (const auto& v : v_grid) {
        TrendDirection d;
        d.v = v;
        d.masses.assign(n_list.size(), 0.0);
        for (const auto& atom : measure.atoms()) {
            if (std::abs(a.delta(x, atom.location).dot(v)) <= tol) continue;
            const double norm = atom.location.norm();
            for (std::size_t i = 0; i < n_list.size(); ++i)
                if (norm >= 1.0 / n_list[i]) d.masses[i] += atom.weight;
        }
        // Rays: locate the radii where the predicate holds on a log grid
        // (64 points per decade) and integrate the profile over those runs.
        for (const auto& ray : measure.rays()) {
            const double rho_hi = std::max(1.0, std::min(ray.profile->rho_max, 1e6));
            const int points = static_cast<int>(64 * std::log10(rho_hi / rho_lo)) + 1;
            const double step = std::log(rho_hi / rho_lo) / points;
            const auto holds = [&](double rho) {
                return std::abs(a.delta(x, rho * ray.direction).dot(v)) > tol;
            };
            std::vector<std::pair<double, double>> runs;
            for (int k = 0; k < points; ++k) {
                const double lo = rho_lo * std::exp(k * step);
                const double hi = k + 1 == points ? kInf : rho_lo * std::exp((k + 1) * step);
                const double probe = std::isinf(hi) ? rho_hi : std::sqrt(lo * hi);
                if (!holds(probe)) continue;
                if (!runs.empty() && runs.back().second == lo)
                    runs.back().second = hi;
                else
                    runs.emplace_back(lo, hi);
            }
            for (std::size_t i = 0; i < n_list.size(); ++i)
                for (const auto& [lo, hi] : runs)
                    d.masses[i] += ray.weight *
                                   radial_power_integral(*ray.profile, 0.0, std::max(lo, 1.0 / n_list[i]), hi);
        }
        d.divergent = diverges(d.masses);
        out.divergent = out.divergent && d.divergent;
        out.directions.push_back(std::move(d));
    }
    return out;
}

Dissipativity dissipativity_check(const DriftField& a, double R, int count) {
    if (!(R > 0.0)) throw InvalidArgument("dissipativity radius must be positive");
    const int n_radii = 8;
    const auto dirs = direction_grid(a.dim(), std::max(2, count / n_radii));
    Dissipativity out;
    out.gamma_estimate = kInf;
    for (int k = 0; k < n_radii; ++k) {
        const double radius = R * std::pow(4.0, static_cast<double>(k) / (n_radii - 1));
        for (const auto& d : dirs) {
            const Vector x = radius * d;
            out.gamma_estimate = std::min(out.gamma_estimate, -a(x).dot(x) / x.squaredNorm());
        }
    }
    out.holds = out.gamma_estimate > 0.0;
    return out;
}

}  // namespace levylab
