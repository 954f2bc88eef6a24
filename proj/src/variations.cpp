#include "levylab/variations.hpp"

#include "levylab/quadrature.hpp"

#include <boost/numeric/odeint.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

namespace levylab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTwo53 = 9007199254740992.0;

// One RK4 step of z' = scale * Jh(z).
double rk4_step(const TimeStretch& s, double scale, double z, double dt) {
    const double k1 = scale * s.Jh(z);
    const double k2 = scale * s.Jh(z + 0.5 * dt * k1);
    const double k3 = scale * s.Jh(z + 0.5 * dt * k2);
    const double k4 = scale * s.Jh(z + dt * k3);
    return z + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

double rk4_flow(const TimeStretch& s, double scale, double x, double duration, double max_step) {
    const int steps = std::max(1, static_cast<int>(std::ceil(duration / max_step - 1e-9)));
    const double dt = duration / steps;
    double z = x;
    for (int k = 0; k < steps; ++k) z = rk4_step(s, scale, z, dt);
    return z;
}

// Closed forms valid where the orbit never meets the support: left of s0 the
// point is fixed, right of s1 it translates by scale * J_inf as long as the
// image stays right of s1.
std::optional<double> flow_shortcut(const TimeStretch& s, double scale, double x) {
    if (scale == 0.0 || x <= s.s0()) return x;
    const double shift = scale * s.J_infinity();
    if (x >= s.s1() && x + std::min(shift, 0.0) >= s.s1()) return x + shift;
    return std::nullopt;
}

double log_ratio_rate(const TimeStretch& s, double scale, double x, double tx) {
    const double jx = s.Jh(x);
    if (jx != 0.0) {
        const double ratio = s.Jh(tx) / jx;
        if (ratio > 0.0) return std::log(ratio);
    }
    return scale * s.h(x);
}

}  // namespace

// ---------------------------------------------------------------------------
// Shapes

double smoothstep(double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double f = std::exp(-1.0 / x);
    const double g = std::exp(-1.0 / (1.0 - x));
    return f / (f + g);
}

double smoothstep_derivative(double x) {
    if (x <= 0.0 || x >= 1.0) return 0.0;
    const double s = smoothstep(x);
    return s * (1.0 - s) * (1.0 / (x * x) + 1.0 / ((1.0 - x) * (1.0 - x)));
}

TimeStretch TimeStretch::zero() { return TimeStretch{}; }

TimeStretch TimeStretch::indicator(double a, double b, double c) {
    if (!(a >= 0.0 && b > a && std::isfinite(b))) throw InvalidArgument("indicator needs 0 <= a < b < inf");
    TimeStretch s;
    s.shape_ = Shape::Indicator;
    s.a_ = a;
    s.b_ = b;
    s.p_ = c;
    s.s0_ = a;
    s.s1_ = b;
    return s;
}

TimeStretch TimeStretch::grid_bump(double a, double b, double beta, double height) {
    if (!(a >= 0.0 && b > a && std::isfinite(b))) throw InvalidArgument("bump needs 0 <= a < b < inf");
    if (!(beta > 0.0 && 2.0 * beta <= b - a)) throw InvalidArgument("bump needs 0 < 2 beta <= b - a");
    TimeStretch s;
    s.shape_ = Shape::GridBump;
    s.a_ = a;
    s.b_ = b;
    s.p_ = beta;
    s.scale_ = height;
    s.s0_ = a;
    s.s1_ = b;
    return s;
}

TimeStretch TimeStretch::sine_bump(double a, double b, double amp) {
    if (!(a >= 0.0 && b > a && std::isfinite(b))) throw InvalidArgument("sine bump needs 0 <= a < b < inf");
    TimeStretch s;
    s.shape_ = Shape::SineBump;
    s.a_ = a;
    s.b_ = b;
    s.scale_ = amp;
    s.s0_ = a;
    s.s1_ = b;
    return s;
}

TimeStretch TimeStretch::tabulated(std::vector<double> xs, std::vector<double> hs) {
    if (xs.size() < 2 || xs.size() != hs.size()) throw InvalidArgument("tabulated h needs >= 2 matching knots");
    if (xs.front() < 0.0) throw InvalidArgument("tabulated h must live on [0, inf)");
    for (std::size_t k = 1; k < xs.size(); ++k)
        if (!(xs[k] > xs[k - 1])) throw InvalidArgument("tabulated knots must increase");
    TimeStretch s;
    s.shape_ = Shape::Tabulated;
    s.cum_.assign(xs.size(), 0.0);
    for (std::size_t k = 1; k < xs.size(); ++k)
        s.cum_[k] = s.cum_[k - 1] + 0.5 * (xs[k] - xs[k - 1]) * (hs[k] + hs[k - 1]);
    s.s0_ = xs.front();
    s.s1_ = xs.back();
    s.xs_ = std::move(xs);
    s.hs_ = std::move(hs);
    return s;
}

double TimeStretch::h(double x) const {
    if (!(x >= s0_ && x <= s1_)) return 0.0;
    switch (shape_) {
        case Shape::Zero: return 0.0;
        case Shape::Indicator: return x < b_ ? scale_ * p_ : 0.0;
        case Shape::GridBump: {
            if (x < a_ + p_) return scale_ * smoothstep_derivative((x - a_) / p_) / p_;
            if (x > b_ - p_) return -scale_ * smoothstep_derivative((b_ - x) / p_) / p_;
            return 0.0;
        }
        case Shape::SineBump: return scale_ * std::sin(2.0 * std::numbers::pi * (x - a_) / (b_ - a_));
        case Shape::Tabulated: {
            const auto k = std::min<std::size_t>(
                std::upper_bound(xs_.begin(), xs_.end(), x) - xs_.begin() - 1, xs_.size() - 2);
            const double w = (x - xs_[k]) / (xs_[k + 1] - xs_[k]);
            return scale_ * ((1.0 - w) * hs_[k] + w * hs_[k + 1]);
        }
    }
    return 0.0;
}

double TimeStretch::Jh(double x) const {
    if (!(x > s0_)) return 0.0;
    switch (shape_) {
        case Shape::Zero: return 0.0;
        case Shape::Indicator: return scale_ * p_ * (std::min(x, b_) - a_);
        case Shape::GridBump: {
            if (x >= b_) return 0.0;
            if (x < a_ + p_) return scale_ * smoothstep((x - a_) / p_);
            if (x > b_ - p_) return scale_ * smoothstep((b_ - x) / p_);
            return scale_;
        }
        case Shape::SineBump: {
            if (x >= b_) return 0.0;
            const double L = b_ - a_;
            return scale_ * L / (2.0 * std::numbers::pi) * (1.0 - std::cos(2.0 * std::numbers::pi * (x - a_) / L));
        }
        case Shape::Tabulated: {
            if (x >= s1_) return scale_ * cum_.back();
            const auto k = static_cast<std::size_t>(std::upper_bound(xs_.begin(), xs_.end(), x) - xs_.begin() - 1);
            const double d = x - xs_[k];
            const double slope = (hs_[k + 1] - hs_[k]) / (xs_[k + 1] - xs_[k]);
            return scale_ * (cum_[k] + d * (hs_[k] + 0.5 * slope * d));
        }
    }
    return 0.0;
}

bool TimeStretch::grid_compatible() const {
    switch (shape_) {
        case Shape::Zero:
        case Shape::Indicator: return false;
        case Shape::GridBump:
        case Shape::SineBump: return scale_ > 0.0;
        case Shape::Tabulated: {
            if (std::abs(cum_.back()) > 1e-12 * (1.0 + std::abs(cum_.front()))) return false;
            const int probes = 64 * static_cast<int>(xs_.size());
            for (int k = 1; k < probes; ++k)
                if (!(Jh(s0_ + (s1_ - s0_) * k / probes) > 0.0)) return false;
            return true;
        }
    }
    return false;
}

TimeStretch TimeStretch::scaled(double factor) const {
    TimeStretch s = *this;
    s.scale_ *= factor;
    return s;
}

std::string TimeStretch::describe() const {
    std::ostringstream os;
    switch (shape_) {
        case Shape::Zero: os << "zero"; break;
        case Shape::Indicator: os << scale_ * p_ << " * 1[" << a_ << ", " << b_ << ")"; break;
        case Shape::GridBump: os << "bump[" << a_ << ", " << b_ << "] beta=" << p_ << " height=" << scale_; break;
        case Shape::SineBump: os << scale_ << " * sin on [" << a_ << ", " << b_ << "]"; break;
        case Shape::Tabulated: os << "tabulated(" << xs_.size() << " knots) x " << scale_; break;
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Flow

double time_stretch_map(const TimeStretch& stretch, double scale, double x) {
    if (auto v = flow_shortcut(stretch, scale, x)) return *v;
    if (stretch.Jh(x) == 0.0) return x;
    return rk4_flow(stretch, scale, x, 1.0, 1e-4);
}

double stretch_rate(const TimeStretch& stretch, double t, double scale) {
    if (scale == 0.0 || t < stretch.s0() || t > stretch.s1()) return 0.0;
    return log_ratio_rate(stretch, scale, t, time_stretch_map(stretch, scale, t));
}

double stretch_rate_quadrature(const TimeStretch& stretch, double t, double scale) {
    if (scale == 0.0) return 0.0;
    const auto& rule = gauss_legendre(64);
    double z = t, at = 0.0, sum = 0.0;
    for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
        const double u = 0.5 * (rule.nodes[j] + 1.0);
        if (u > at) z = rk4_flow(stretch, scale, z, u - at, 1e-4);
        at = u;
        sum += 0.5 * rule.weights[j] * scale * stretch.h(z);
    }
    return sum;
}

double stretch_offset(const TimeStretch& stretch, double scale) {
    const double far = stretch.s1() + std::abs(scale * stretch.J_infinity()) + 1.0;
    return time_stretch_map(stretch, scale, far) - far;
}

StretchFlow::StretchFlow(const TimeStretch& stretch, double scale, double tol)
    : stretch_(stretch), scale_(scale) {
    if (!(tol > 0.0)) throw InvalidArgument("flow cache tolerance must be positive");
    lo_ = stretch.s0();
    hi_ = stretch.s1() + std::max(0.0, -scale * stretch.J_infinity());
    if (scale == 0.0 || !(hi_ > lo_)) return;

    using namespace boost::numeric::odeint;
    auto stepper = make_controlled(1e-14, 1e-14, runge_kutta_dopri5<double>());
    const auto exact = [&](double x) {
        if (auto v = flow_shortcut(stretch, scale, x)) return *v;
        double z = x;
        integrate_adaptive(stepper, [&](double y, double& dy, double) { dy = scale * stretch.Jh(y); }, z, 0.0, 1.0,
                           1e-3);
        return z;
    };
    struct Knot {
        double x, t, dt;
    };
    const auto knot = [&](double x) {
        const double t = exact(x);
        return Knot{x, t, slope_at(x, t)};
    };
    const auto hermite = [](const Knot& l, const Knot& r, double x) {
        const double h = r.x - l.x, w = (x - l.x) / h, w2 = w * w, w3 = w2 * w;
        return (2 * w3 - 3 * w2 + 1) * l.t + (w3 - 2 * w2 + w) * h * l.dt + (-2 * w3 + 3 * w2) * r.t +
               (w3 - w2) * h * r.dt;
    };

    // Start from 65 uniform knots and bisect every cell whose midpoint (and
    // quarter points) miss the interpolant by more than tol.
    std::vector<Knot> done, todo;
    const int start = 64;
    for (int k = 0; k <= start; ++k) todo.push_back(knot(lo_ + (hi_ - lo_) * k / start));
    std::reverse(todo.begin(), todo.end());
    const double min_width = (hi_ - lo_) * 1e-9;
    while (todo.size() > 1) {
        const Knot l = todo.back();
        const Knot r = todo[todo.size() - 2];
        const Knot m = knot(0.5 * (l.x + r.x));
        const double err = std::max(std::abs(hermite(l, r, m.x) - m.t),
                                    std::abs(hermite(l, r, 0.5 * (l.x + m.x)) - exact(0.5 * (l.x + m.x))));
        if (err > tol && r.x - l.x > min_width) {
            todo.insert(todo.end() - 1, m);
        } else {
            done.push_back(l);
            todo.pop_back();
        }
    }
    done.push_back(todo.back());
    for (const auto& k : done) {
        x_.push_back(k.x);
        t_.push_back(k.t);
        dt_.push_back(k.dt);
    }
}

double StretchFlow::slope_at(double x, double tx) const {
    const double jx = stretch_.Jh(x);
    if (jx != 0.0) {
        const double ratio = stretch_.Jh(tx) / jx;
        if (ratio > 0.0) return ratio;
    }
    return std::exp(scale_ * stretch_.h(x));
}

double StretchFlow::operator()(double x) const {
    if (scale_ == 0.0 || x <= lo_) return x;
    if (x >= hi_) return x + scale_ * stretch_.J_infinity();
    const auto k = std::min<std::size_t>(std::upper_bound(x_.begin(), x_.end(), x) - x_.begin() - 1, x_.size() - 2);
    const double h = x_[k + 1] - x_[k], w = (x - x_[k]) / h, w2 = w * w, w3 = w2 * w;
    return (2 * w3 - 3 * w2 + 1) * t_[k] + (w3 - 2 * w2 + w) * h * dt_[k] + (-2 * w3 + 3 * w2) * t_[k + 1] +
           (w3 - w2) * h * dt_[k + 1];
}

double StretchFlow::rate(double x) const {
    if (scale_ == 0.0 || x < stretch_.s0() || x > stretch_.s1()) return 0.0;
    return log_ratio_rate(stretch_, scale_, x, (*this)(x));
}

// ---------------------------------------------------------------------------
// Transforms

MarkSet all_marks() {
    return [](const Vector&, double) { return true; };
}

MarkSet norm_band(double lo, double hi) {
    return [lo, hi](const Vector& u, double) {
        const double n = u.norm();
        return n >= lo && n < hi;
    };
}

namespace {

template <typename Map>
PointConfiguration transform_with(const PointConfiguration& config, const MarkSet& gamma, Map&& map) {
    PointConfiguration out = config;
    for (auto& e : out.events) {
        if (!gamma(e.u, e.aux)) continue;
        const double moved = map(e.tau);
        if (!(moved >= config.t0 && moved < config.t1))
            throw InvalidArgument("transformed event time " + std::to_string(moved) + " leaves the window [" +
                                  std::to_string(config.t0) + ", " + std::to_string(config.t1) + ")");
        e.tau = moved;
    }
    std::stable_sort(out.events.begin(), out.events.end(),
                     [](const Event& a, const Event& b) { return a.tau < b.tau; });
    return out;
}

template <typename Rate>
double density_with(const PointConfiguration& config, const MarkSet& gamma, double offset, double pi_gamma,
                    Rate&& rate) {
    if (!(pi_gamma >= 0.0 && std::isfinite(pi_gamma)))
        throw InvalidArgument("admissibility density needs a finite Pi(gamma)");
    double log_p = -offset * pi_gamma;
    for (const auto& e : config.events)
        if (gamma(e.u, e.aux)) log_p += rate(e.tau);
    return std::exp(log_p);
}

}  // namespace

PointConfiguration transform_configuration(const PointConfiguration& config, const TimeStretch& stretch,
                                           const MarkSet& gamma, double scale) {
    return transform_with(config, gamma, [&](double t) { return time_stretch_map(stretch, -scale, t); });
}

PointConfiguration transform_configuration(const PointConfiguration& config, const StretchFlow& backward,
                                           const MarkSet& gamma) {
    return transform_with(config, gamma, [&](double t) { return backward(t); });
}

double admissibility_density(const PointConfiguration& config, const TimeStretch& stretch, const MarkSet& gamma,
                             double pi_gamma, double scale) {
    return density_with(config, gamma, stretch_offset(stretch, scale), pi_gamma,
                        [&](double t) { return stretch_rate(stretch, t, scale); });
}

double admissibility_density(const PointConfiguration& config, const StretchFlow& forward, const MarkSet& gamma,
                             double pi_gamma) {
    return density_with(config, gamma, forward.scale() * forward.stretch().J_infinity(), pi_gamma,
                        [&](double t) { return forward.rate(t); });
}

// ---------------------------------------------------------------------------
// Differential grid

double grid_eps(long long n) {
    if (n >= 0) return 1.0 / (static_cast<double>(n) + 1.0);
    return (static_cast<double>(-n) + 2.0) / 2.0;
}

long long annulus_index(double norm) {
    if (!(norm >= 1e-15) || !std::isfinite(norm))
        throw InvalidArgument("mark norm " + std::to_string(norm) + " outside the grid range [1e-15, inf)");
    long long n = norm < 1.0 ? static_cast<long long>(std::ceil(1.0 / norm)) - 2
                             : -(static_cast<long long>(std::floor(2.0 * norm)) - 1);
    while (norm < grid_eps(n + 1)) ++n;
    while (norm >= grid_eps(n)) --n;
    return n;
}

bool GridCell::contains(double tau, const Vector& u, double aux) const {
    const double n = u.norm();
    return tau >= a && tau < b && n >= norm_lo && n < norm_hi && aux >= aux_lo && aux < aux_hi;
}

namespace {

double band_mass(const LevyMeasure& measure, double lo, double hi) {
    double m = 0.0;
    for (const auto& a : measure.atoms()) {
        const double n = a.location.norm();
        if (n >= lo && n < hi) m += a.weight;
    }
    std::map<const RadialProfile*, double> grouped;
    for (const auto& r : measure.rays()) grouped[r.profile.get()] += r.weight;
    for (const auto& [profile, w] : grouped) m += w * radial_power_integral(*profile, 0.0, lo, hi);
    return m;
}

}  // namespace

DifferentialGrid::DifferentialGrid(const LevyMeasure& measure, double t, double B, double gamma, double beta,
                                   double eps_floor)
    : measure_(measure), t_(t), B_(B), gamma_(gamma), beta_(beta) {
    if (!(t > 0.0 && std::isfinite(t))) throw InvalidParams("grid horizon must be positive");
    if (!(B > 0.0 && std::isfinite(B))) throw InvalidParams("B must be positive and finite");
    if (!(gamma > 0.0 && gamma < 0.5)) throw InvalidParams("gamma must lie in (0, 1/2)");
    if (!(beta > 0.0 && beta < 0.5 && 2.0 * beta < t)) throw InvalidParams("beta must lie in (0, min(1/2, t/2))");
    if (!(eps_floor >= 1e-15 && eps_floor <= 1.0)) throw InvalidParams("eps_floor must lie in [1e-15, 1]");

    // Atom annuli are tabulated sparsely; radial mass fills the contiguous
    // range from the top annulus down to eps_floor (at most 20000 annuli).
    std::map<long long, double> masses;
    double top = measure.rays().empty() ? 0.0 : 16.0;
    for (const auto& a : measure.atoms()) {
        const double n = a.location.norm();
        if (n < eps_floor) continue;
        masses[annulus_index(n)] += a.weight;
        top = std::max(top, n);
    }
    if (!measure.rays().empty()) {
        const long long n_lo = annulus_index(top);
        const long long n_hi = std::min(annulus_index(eps_floor), n_lo + 20000);
        std::map<const RadialProfile*, double> grouped;
        for (const auto& r : measure.rays()) grouped[r.profile.get()] += r.weight;
        for (long long n = n_lo; n <= n_hi; ++n)
            for (const auto& [profile, w] : grouped)
                masses[n] += w * radial_power_integral(*profile, 0.0, grid_eps(n + 1), grid_eps(n));
    }
    for (const auto& [n, m] : masses) {
        if (!(m > 0.0)) continue;
        annuli_.push_back(make_annulus(n, m));
        const Annulus& A = annuli_.back();
        if (std::isfinite(A.K)) summed_ += t_ * t_ * m * m / (2.0 * A.K);
    }
    if (!(summed_ < gamma_)) throw InvalidParams("summed grid bound " + std::to_string(summed_) + " >= gamma");
}

Annulus DifferentialGrid::make_annulus(long long n, double mass) const {
    Annulus A;
    A.n = n;
    A.eps_hi = grid_eps(n);
    A.eps_lo = grid_eps(n + 1);
    A.mass = mass;
    const double absn = static_cast<double>(n < 0 ? -n : n);
    double third = 0.0;
    if (mass > 0.0)
        third = absn > 4096.0 ? kInf : std::ldexp(3.0 / gamma_ * (t_ * mass) * (t_ * mass), static_cast<int>(absn) - 1);
    const double base = std::max({B_, 2.0 * t_ * mass, third});
    A.K = std::isfinite(base) ? std::floor(base) + 2.0 : kInf;

    // K > B, t Pi / K < 1/2, t^2 Pi^2 / K < (2 gamma / 3) 2^{-|n|}
    if (!(A.K > B_) || !(t_ * mass / A.K < 0.5))
        throw InvalidParams("annulus " + std::to_string(n) + " violates the grid bounds");
    if (mass > 0.0 && std::isfinite(A.K) &&
        !(2.0 * std::log(t_ * mass) - std::log(A.K) <
          std::log(2.0 * gamma_ / 3.0) - absn * std::numbers::ln2 + 1e-12))
        throw InvalidParams("annulus " + std::to_string(n) + " violates the summability bound");
    return A;
}

Annulus DifferentialGrid::annulus(long long n) const {
    const auto it = std::lower_bound(annuli_.begin(), annuli_.end(), n,
                                     [](const Annulus& A, long long v) { return A.n < v; });
    if (it != annuli_.end() && it->n == n) return *it;
    return make_annulus(n, band_mass(measure_, grid_eps(n + 1), grid_eps(n)));
}

std::optional<GridCell> DifferentialGrid::cell_of(double tau, const Vector& u, double aux) const {
    if (!(tau >= 0.0 && tau < t_)) return std::nullopt;
    const Annulus A = annulus(annulus_index(u.norm()));
    GridCell c;
    c.annulus = A.n;
    c.a = 0.0;
    c.b = t_;
    c.norm_lo = A.eps_lo;
    c.norm_hi = A.eps_hi;
    c.height = std::min(1.0 / A.eps_hi, 1.0);
    const double K = A.K < kTwo53 ? A.K : kTwo53;
    c.sub = std::min(std::floor(aux * K), K - 1.0);
    c.aux_lo = c.sub / K;
    c.aux_hi = (c.sub + 1.0) / K;
    return c;
}

TimeStretch DifferentialGrid::stretch(const GridCell& cell) const {
    return TimeStretch::grid_bump(cell.a, cell.b, beta_, cell.height);
}

MarkSet DifferentialGrid::mark_set(const GridCell& cell) const {
    return [cell](const Vector& u, double aux) {
        const double n = u.norm();
        return n >= cell.norm_lo && n < cell.norm_hi && aux >= cell.aux_lo && aux < cell.aux_hi;
    };
}

std::vector<GridCell> DifferentialGrid::cells(long long max_sub) const {
    std::vector<GridCell> out;
    for (const auto& A : annuli_) {
        if (!(A.K <= static_cast<double>(max_sub))) continue;
        for (long long s = 0; s < static_cast<long long>(A.K); ++s) {
            GridCell c;
            c.annulus = A.n;
            c.sub = static_cast<double>(s);
            c.a = 0.0;
            c.b = t_;
            c.norm_lo = A.eps_lo;
            c.norm_hi = A.eps_hi;
            c.aux_lo = c.sub / A.K;
            c.aux_hi = (c.sub + 1.0) / A.K;
            c.height = std::min(1.0 / A.eps_hi, 1.0);
            out.push_back(c);
        }
    }
    return out;
}

bool cells_disjoint(const GridCell& a, const GridCell& b) {
    const auto apart = [](double lo1, double hi1, double lo2, double hi2) { return hi1 <= lo2 || hi2 <= lo1; };
    return apart(a.a, a.b, b.a, b.b) || apart(a.norm_lo, a.norm_hi, b.norm_lo, b.norm_hi) ||
           apart(a.aux_lo, a.aux_hi, b.aux_lo, b.aux_hi);
}

// ---------------------------------------------------------------------------
// Finite differences

double convergence_slope(const std::vector<double>& eps, const std::vector<double>& errors) {
    if (eps.size() != errors.size() || eps.size() < 2) throw InvalidArgument("slope needs >= 2 matching points");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(eps.size());
    for (std::size_t i = 0; i < eps.size(); ++i) {
        if (!(eps[i] > 0.0 && errors[i] > 0.0)) throw InvalidArgument("slope needs positive steps and errors");
        const double x = std::log(eps[i]), y = std::log(errors[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

FiniteDifference finite_diff_derivative(const ConfigFunctional& f, const PointConfiguration& config,
                                        const TimeStretch& stretch, const MarkSet& gamma,
                                        std::vector<double> eps_list, double tol) {
    if (eps_list.size() < 2) throw InvalidArgument("finite differences need at least two steps");
    std::sort(eps_list.begin(), eps_list.end(), std::greater<>());
    FiniteDifference out;
    out.eps = eps_list;
    const Vector f0 = f(config);
    for (double e : eps_list) {
        const Vector fp = f(transform_configuration(config, stretch, gamma, e));
        const Vector fm = f(transform_configuration(config, stretch, gamma, -e));
        out.forward.push_back((fp - f0) / e);
        out.central.push_back((fp - fm) / (2.0 * e));
    }
    const std::size_t k = eps_list.size() - 1;
    const double q = eps_list[k - 1] / eps_list[k];
    out.richardson = (q * out.forward[k] - out.forward[k - 1]) / (q - 1.0);

    std::vector<double> steps, incs;
    for (std::size_t i = 0; i + 1 < eps_list.size(); ++i) {
        const double d = (out.forward[i] - out.forward[i + 1]).norm();
        if (d > 0.0) {
            steps.push_back(eps_list[i]);
            incs.push_back(d);
        }
    }
    out.slope = steps.size() >= 2 ? convergence_slope(steps, incs) : std::numeric_limits<double>::quiet_NaN();

    const double scale = std::max(out.central[k].norm(), out.central[k - 1].norm());
    if ((out.central[k] - out.central[k - 1]).norm() > tol * (scale + 1e-8))
        throw NonConvergent("central differences disagree at the two finest steps");
    return out;
}

}  // namespace levylab
