#include "levylab/levy_measure.hpp"

#include "levylab/quadrature.hpp"

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

namespace levylab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(6);
    os << x;
    return os.str();
}

void validate_atom(const Atom& a, int dim, const std::string& label) {
    if (a.location.size() != dim)
        throw InvalidArgument(label + ": atom dimension " + std::to_string(a.location.size()) +
                              " != " + std::to_string(dim));
    if (!(a.weight > 0.0) || !std::isfinite(a.weight))
        throw InvalidArgument(label + ": atom weights must be finite and strictly positive");
    if (!a.location.allFinite() || a.location.norm() == 0.0)
        throw InvalidArgument(label + ": atom locations must be finite and nonzero");
}

double second_moment_term(const Atom& a) {
    return a.weight * std::min(a.location.squaredNorm(), 1.0);
}

// sum_{k > n} w_k min(|u_k|^2, 1), dominated by a geometric series from the
// first two omitted terms (valid for eventually log-concave tails such as
// gamma^{-k} and 1/k!).
double geometric_domination(const AtomicSequence& seq) {
    const int n = seq.n_max;
    if (n + 1 > seq.n_limit) return 0.0;
    const double a1 = second_moment_term(seq.generator(n + 1));
    if (a1 == 0.0) return 0.0;
    if (n + 2 > seq.n_limit) return a1;
    const double a2 = second_moment_term(seq.generator(n + 2));
    const double q = a2 / a1;
    if (!(q < 1.0)) return kInf;
    return a1 / (1.0 - q);
}

// 1/k! by repeated division, exact to a few ulps for k <= 170.
double inverse_factorial(int k) {
    static const std::vector<double> table = [] {
        std::vector<double> t(171, 1.0);
        for (int i = 1; i <= 170; ++i) t[i] = t[i - 1] / i;
        return t;
    }();
    return table.at(k);
}

double ray_mass_above(const RadialRay& ray, double floor) {
    return ray.weight * radial_power_integral(*ray.profile, 0.0, floor, kInf);
}

// int min(c rho / eps, 1)^r pi(rho) d rho for one ray with c = |(theta, v)|.
double ray_normalized_moment(const RadialProfile& profile, int r, double eps, double c) {
    if (c <= 0.0) return 0.0;
    const double knee = eps / c;
    return radial_power_integral(profile, r, 0.0, knee, r * std::log(c / eps)) +
           radial_power_integral(profile, 0.0, knee, kInf);
}

// Rays that share one profile (the lattice discretization of a uniform
// angular law) only differ through c = |(theta, v)|; ln F(c) is smooth in
// ln c, so it is tabulated once per (profile, r, eps) and interpolated.
class RayMomentTable {
public:
    static constexpr double kLogCMin = -13.815510557964274;  // ln 1e-6
    static constexpr int kKnots = 257;

    RayMomentTable(const RadialProfile& profile, int r, double eps) : profile_(profile), r_(r), eps_(eps) {
        std::vector<double> values(kKnots);
        const double step = -kLogCMin / (kKnots - 1);
        for (int j = 0; j < kKnots; ++j) {
            const double f = ray_normalized_moment(profile, r, eps, std::exp(kLogCMin + j * step));
            if (!(f > 0.0) || !std::isfinite(f)) return;
            values[j] = std::log(f);
        }
        spline_.emplace(values.begin(), values.end(), kLogCMin, step);
    }

    double operator()(double c) const {
        if (c <= 0.0) return 0.0;
        if (!spline_ || c < 1e-6) return ray_normalized_moment(profile_, r_, eps_, c);
        return std::exp((*spline_)(std::log(std::min(c, 1.0))));
    }

private:
    const RadialProfile& profile_;
    int r_;
    double eps_;
    std::optional<boost::math::interpolators::cardinal_cubic_b_spline<double>> spline_;
};

std::map<const RadialProfile*, int> profile_counts(const LevyMeasure& measure) {
    std::map<const RadialProfile*, int> counts;
    for (const auto& ray : measure.rays()) ++counts[ray.profile.get()];
    return counts;
}

struct MomentEvaluator {
    const LevyMeasure& measure;
    int r;
    double eps;
    std::map<const RadialProfile*, RayMomentTable> tables;

    MomentEvaluator(const LevyMeasure& m, int r_in, double eps_in) : measure(m), r(r_in), eps(eps_in) {
        for (const auto& [profile, count] : profile_counts(m))
            if (count >= 32) tables.emplace(profile, RayMomentTable(*profile, r, eps));
    }

    double operator()(const Vector& v, std::optional<double> aperture) const {
        double total = 0.0;
        for (const auto& atom : measure.atoms()) {
            const double proj = std::abs(atom.location.dot(v));
            if (aperture && proj < *aperture * atom.location.norm()) continue;
            total += atom.weight * std::pow(std::min(proj / eps, 1.0), r);
        }
        for (const auto& ray : measure.rays()) {
            const double c = std::abs(ray.direction.dot(v));
            if (aperture && c < *aperture) continue;
            const auto it = tables.find(ray.profile.get());
            total += ray.weight * (it != tables.end() ? it->second(c)
                                                      : ray_normalized_moment(*ray.profile, r, eps, c));
        }
        return total;
    }
};

void check_eps_list(const std::vector<double>& eps_list) {
    for (std::size_t i = 0; i < eps_list.size(); ++i) {
        if (!(eps_list[i] > 0.0 && eps_list[i] < 1.0))
            throw InvalidArgument("eps values must lie in (0, 1)");
        if (i > 0 && !(eps_list[i] < eps_list[i - 1]))
            throw InvalidArgument("eps values must be strictly decreasing");
    }
}

std::vector<Vector> index_directions(int dim, int count) {
    // |(u, v)| is even in v, so one representative per antipodal pair suffices
    // except in 1D where the grid is {-1, +1} by convention.
    return direction_grid(dim, count, dim > 1);
}

}  // namespace

// ---------------------------------------------------------------------------
// Builtin generators

AtomicSequence AtomicSequence::geometric(double gamma, int n_max, double weight) {
    if (!(gamma > 1.0)) throw InvalidArgument("geometric atoms need gamma > 1");
    AtomicSequence s;
    s.dim = 1;
    s.label = "geometric(gamma=" + fmt(gamma) + ")";
    const double log_gamma = std::log(gamma);
    s.generator = [log_gamma, weight](int k) {
        return Atom{Vector::Constant(1, std::exp(-k * log_gamma)), weight};
    };
    s.n_max = n_max;
    s.n_limit = static_cast<int>(700.0 / log_gamma);
    s.analytic_tail = [log_gamma, weight](int n) {
        const double q = std::exp(-2.0 * log_gamma);
        return weight * std::exp(-2.0 * (n + 1) * log_gamma) / (1.0 - q);
    };
    return s;
}

AtomicSequence AtomicSequence::factorial_weighted(int n_max) {
    AtomicSequence s;
    s.dim = 1;
    s.label = "factorial-weighted";
    s.generator = [](int k) {
        return Atom{Vector::Constant(1, inverse_factorial(k)), static_cast<double>(k)};
    };
    s.n_max = n_max;
    s.n_limit = 170;
    return s;
}

AtomicSequence AtomicSequence::factorial(int n_max) {
    AtomicSequence s = factorial_weighted(n_max);
    s.label = "factorial";
    s.generator = [](int k) { return Atom{Vector::Constant(1, inverse_factorial(k)), 1.0}; };
    return s;
}

AtomicSequence AtomicSequence::parabola(int n_max) {
    AtomicSequence s;
    s.dim = 2;
    s.label = "parabola";
    s.generator = [](int k) {
        const double x = inverse_factorial(k);
        Vector u(2);
        u << x, x * x;
        return Atom{u, 1.0};
    };
    s.n_max = n_max;
    s.n_limit = 97;  // (1/k!)^2 stays a normal double
    return s;
}

AtomicSequence AtomicSequence::table(std::vector<Atom> atoms) {
    if (atoms.empty()) throw InvalidArgument("atom table is empty");
    AtomicSequence s;
    s.dim = static_cast<int>(atoms.front().location.size());
    s.label = "table(" + std::to_string(atoms.size()) + " atoms)";
    auto shared = std::make_shared<const std::vector<Atom>>(std::move(atoms));
    s.generator = [shared](int k) { return (*shared)[k - 1]; };
    s.n_max = static_cast<int>(shared->size());
    s.n_limit = s.n_max;
    s.analytic_tail = [](int) { return 0.0; };
    return s;
}

RadialProfile RadialProfile::power_law(double c, double alpha, double lambda, double rho_min,
                                       double rho_max) {
    if (!(c > 0.0)) throw InvalidArgument("power law constant must be positive");
    if (!(alpha > -1.0)) throw InvalidArgument("power law exponent alpha must exceed -1");
    if (lambda < 0.0) throw InvalidArgument("tempering rate must be nonnegative");
    if (!(rho_max > rho_min) || rho_min < 0.0) throw InvalidArgument("empty radial support");
    RadialProfile p;
    p.label = "power-law(c=" + fmt(c) + ", alpha=" + fmt(alpha) +
              (lambda > 0.0 ? ", lambda=" + fmt(lambda) : std::string()) + ")";
    const double log_c = std::log(c);
    p.log_density = [log_c, alpha, lambda](double s) {
        return log_c - (1.0 + alpha) * s - (lambda > 0.0 ? lambda * std::exp(s) : 0.0);
    };
    p.rho_min = rho_min;
    p.rho_max = rho_max;
    return p;
}

AngularMeasure AngularMeasure::symmetric_1d(double weight_each) {
    return {{Vector::Constant(1, 1.0), Vector::Constant(1, -1.0)}, {weight_each, weight_each}};
}

AngularMeasure AngularMeasure::one_sided_1d(double weight) {
    return {{Vector::Constant(1, 1.0)}, {weight}};
}

AngularMeasure AngularMeasure::uniform(int dim, double total, int count) {
    if (dim == 1) return symmetric_1d(total / 2.0);
    AngularMeasure out;
    out.directions = direction_grid(dim, count, false);
    out.weights.assign(out.directions.size(), total / static_cast<double>(out.directions.size()));
    return out;
}

// ---------------------------------------------------------------------------
// LevyMeasure

LevyMeasure LevyMeasure::zero(int dim) {
    check_dim(dim);
    LevyMeasure m;
    m.dim_ = dim;
    m.description_ = "zero";
    return m;
}

LevyMeasure::LevyMeasure(AtomicSequence seq) {
    check_dim(seq.dim);
    if (!seq.generator) throw InvalidArgument("atomic sequence without generator");
    if (seq.n_max < 1 || seq.n_max > seq.n_limit)
        throw InvalidArgument(seq.label + ": truncation index " + std::to_string(seq.n_max) +
                              " outside [1, " + std::to_string(seq.n_limit) + "]");
    dim_ = seq.dim;
    description_ = seq.label + " N_max=" + std::to_string(seq.n_max);
    atoms_.reserve(seq.n_max);
    for (int k = 1; k <= seq.n_max; ++k) {
        atoms_.push_back(seq.generator(k));
        validate_atom(atoms_.back(), dim_, seq.label);
    }
    tail_bound_ = seq.analytic_tail ? seq.analytic_tail(seq.n_max) : geometric_domination(seq);
    sources_.push_back({std::move(seq), 1.0});
    finalize();
}

LevyMeasure::LevyMeasure(RadialDensity radial) {
    check_dim(radial.dim);
    if (!radial.profile.log_density) throw InvalidArgument("radial profile without density");
    const auto& ang = radial.angular;
    if (ang.directions.empty() || ang.directions.size() != ang.weights.size())
        throw InvalidArgument("angular measure needs matching directions and weights");
    dim_ = radial.dim;
    description_ = radial.profile.label + " x angular(" + std::to_string(ang.directions.size()) + ")";
    auto profile = std::make_shared<const RadialProfile>(std::move(radial.profile));
    for (std::size_t i = 0; i < ang.directions.size(); ++i) {
        const Vector& d = ang.directions[i];
        if (d.size() != dim_ || std::abs(d.norm() - 1.0) > 1e-12)
            throw InvalidArgument("angular directions must be unit vectors of the measure dimension");
        if (!(ang.weights[i] > 0.0)) throw InvalidArgument("angular weights must be positive");
        rays_.push_back({d, ang.weights[i], profile});
    }
    finalize();
}

LevyMeasure::LevyMeasure(Mixture mixture) {
    if (mixture.components.empty()) throw InvalidArgument("mixture without components");
    dim_ = mixture.components.front().second.dim();
    description_ = "mixture(";
    for (std::size_t i = 0; i < mixture.components.size(); ++i) {
        const auto& [w, m] = mixture.components[i];
        if (!(w > 0.0) || !std::isfinite(w)) throw InvalidArgument("mixture weights must be positive");
        if (m.dim() != dim_) throw InvalidArgument("mixture components differ in dimension");
        append(m, w);
        description_ += (i ? " + " : "") + fmt(w) + "*" + m.description();
    }
    description_ += ")";
    finalize();
}

void LevyMeasure::append(const LevyMeasure& other, double multiplier) {
    for (const auto& a : other.atoms_) atoms_.push_back({a.location, multiplier * a.weight});
    for (const auto& r : other.rays_) rays_.push_back({r.direction, multiplier * r.weight, r.profile});
    for (const auto& s : other.sources_) sources_.push_back({s.sequence, multiplier * s.multiplier});
    tail_bound_ += multiplier * other.tail_bound_;
}

void LevyMeasure::finalize() {
    double total = tail_bound_;
    for (const auto& a : atoms_) total += second_moment_term(a);
    for (const auto& ray : rays_)
        total += ray.weight * (radial_power_integral(*ray.profile, 2.0, 0.0, 1.0) +
                               radial_power_integral(*ray.profile, 0.0, 1.0, kInf));
    if (!std::isfinite(total))
        throw InvalidArgument(description_ + ": integral of min(|u|^2, 1) is not finite");
    integrability_ = total;
}

std::vector<Atom> LevyMeasure::extended_atoms(int factor) const {
    std::vector<Atom> out;
    for (const auto& [seq, mult] : sources_) {
        const long hi = std::min<long>(static_cast<long>(factor) * seq.n_max, seq.n_limit);
        for (long k = seq.n_max + 1; k <= hi; ++k) {
            Atom a = seq.generator(static_cast<int>(k));
            a.weight *= mult;
            out.push_back(std::move(a));
        }
    }
    return out;
}

double radial_power_integral(const RadialProfile& profile, double p, double a, double b,
                             double log_scale) {
    a = std::max(a, profile.rho_min);
    b = std::min(b, profile.rho_max);
    if (!(b > a)) return 0.0;
    const double lo = a > 0.0 ? std::log(a) : -kInf;
    const double hi = std::isinf(b) ? kInf : std::log(b);
    const auto& logpi = profile.log_density;
    const auto result = integrate_exp_log(
        [&](double s) { return log_scale + (p + 1.0) * s + logpi(s); }, lo, hi);
    return result.diverged ? kInf : result.value;
}

// ---------------------------------------------------------------------------
// Intensity functionals

double normalized_truncated_moment(const LevyMeasure& measure, int r, double eps, const Vector& v,
                                   std::optional<double> aperture) {
    if (r < 1) throw InvalidArgument("moment power must be a positive integer");
    if (!(eps > 0.0)) throw InvalidArgument("eps must be positive");
    if (aperture) check_aperture(*aperture);
    if (v.size() != measure.dim()) throw InvalidArgument("direction dimension mismatch");
    return MomentEvaluator(measure, r, eps)(v, aperture);
}

double truncated_moment(const LevyMeasure& measure, int r, double eps, const Cone& cone) {
    return std::pow(eps, r) * normalized_truncated_moment(measure, r, eps, cone.axis, cone.aperture);
}

double truncated_moment(const LevyMeasure& measure, int r, double eps, const Vector& v) {
    return std::pow(eps, r) * normalized_truncated_moment(measure, r, eps, v);
}

double truncated_moment(const LevyMeasure& measure, int r, double eps) {
    if (measure.dim() != 1) throw InvalidArgument("direction required for dim > 1");
    return truncated_moment(measure, r, eps, Vector::Constant(1, 1.0));
}

double mass_above(const LevyMeasure& measure, double floor, const std::optional<Cone>& cone) {
    double total = 0.0;
    for (const auto& atom : measure.atoms()) {
        if (atom.location.norm() < floor) continue;
        if (cone && !cone->contains(atom.location)) continue;
        total += atom.weight;
    }
    for (const auto& ray : measure.rays()) {
        if (cone && std::abs(ray.direction.dot(cone->axis)) < cone->aperture) continue;
        total += ray_mass_above(ray, floor);
    }
    return total;
}

Vector first_moment_vector(const LevyMeasure& measure, double lo, double hi) {
    Vector out = Vector::Zero(measure.dim());
    for (const auto& atom : measure.atoms()) {
        const double n = atom.location.norm();
        if (n >= lo && n <= hi) out += atom.weight * atom.location;
    }
    for (const auto& ray : measure.rays())
        out += ray.weight * radial_power_integral(*ray.profile, 1.0, lo, hi) * ray.direction;
    return out;
}

Matrix second_moment_matrix(const LevyMeasure& measure, double hi) {
    Matrix out = Matrix::Zero(measure.dim(), measure.dim());
    for (const auto& atom : measure.atoms())
        if (atom.location.norm() < hi) out += atom.weight * atom.location * atom.location.transpose();
    for (const auto& ray : measure.rays())
        out += ray.weight * radial_power_integral(*ray.profile, 2.0, 0.0, hi) * ray.direction *
               ray.direction.transpose();
    return out;
}

IndexProfile order_index_profile(const LevyMeasure& measure, int r, double aperture,
                                 const std::vector<double>& eps_list, int direction_count) {
    check_aperture(aperture);
    check_eps_list(eps_list);
    const auto dirs = index_directions(measure.dim(), direction_count);
    IndexProfile out;
    out.power = r;
    out.aperture = aperture;
    out.eps = eps_list;
    out.direction_count = static_cast<int>(dirs.size());
    for (double eps : eps_list) {
        const MomentEvaluator eval(measure, r, eps);
        double best = kInf;
        for (const auto& v : dirs) best = std::min(best, eval(v, aperture));
        out.values.push_back(best / std::log(1.0 / eps));
    }
    return out;
}

IndexProfile lower_index_profile(const LevyMeasure& measure, const std::vector<double>& eps_list,
                                 int direction_count) {
    check_eps_list(eps_list);
    const auto dirs = index_directions(measure.dim(), direction_count);
    IndexProfile out;
    out.power = 0;
    out.lower = true;
    out.eps = eps_list;
    out.direction_count = static_cast<int>(dirs.size());
    for (double eps : eps_list) {
        const MomentEvaluator eval(measure, 2, eps);
        double best = 0.0;
        for (const auto& v : dirs) best = std::max(best, eval(v, std::nullopt));
        out.values.push_back(best / std::log(1.0 / eps));
    }
    return out;
}

std::vector<double> default_eps_list(const LevyMeasure& measure, int count) {
    if (count < 2) throw InvalidArgument("eps list needs at least 2 points");
    double floor = 1e-12;
    if (!measure.atoms().empty()) {
        double smallest = kInf;
        for (const auto& atom : measure.atoms()) smallest = std::min(smallest, atom.location.norm());
        floor = std::max(10.0 * smallest, 1e-300);
    }
    floor = std::min(floor, 1e-5);
    std::vector<double> out;
    const double hi = std::log(1e-2);
    const double lo = std::log(floor);
    for (int i = 0; i < count; ++i) out.push_back(std::exp(hi + (lo - hi) * i / (count - 1)));
    return out;
}

std::string to_string(IndexClass::Kind kind) {
    switch (kind) {
        case IndexClass::Kind::Zero: return "Zero";
        case IndexClass::Kind::Finite: return "Finite";
        case IndexClass::Kind::Infinite: return "Infinite";
    }
    return "?";
}

IndexClass classify_index(const IndexProfile& profile) {
    const auto n = profile.eps.size();
    if (n < 5 || profile.values.size() != n)
        throw InsufficientProfile("index profile needs at least 5 points, got " + std::to_string(n));
    if (std::log10(profile.eps.front() / profile.eps.back()) < 3.0 - 1e-9)
        throw InsufficientProfile("index profile spans fewer than 3 decades of eps");

    const std::size_t start = n - std::max<std::size_t>(3, static_cast<std::size_t>(std::ceil(0.4 * n)));
    IndexClass out;
    std::vector<double> xs, ys, tail;
    for (std::size_t i = start; i < n; ++i) {
        tail.push_back(profile.values[i]);
        if (profile.values[i] > 0.0) {
            xs.push_back(std::log(std::log(1.0 / profile.eps[i])));
            ys.push_back(std::log(profile.values[i]));
        }
    }
    const double mean = std::accumulate(tail.begin(), tail.end(), 0.0) / tail.size();
    double var = 0.0;
    for (double v : tail) var += (v - mean) * (v - mean);
    out.uncertainty = std::sqrt(var / std::max<std::size_t>(1, tail.size() - 1));
    if (xs.size() < tail.size()) {
        // Some tail values vanish: the profile has reached zero.
        out.kind = IndexClass::Kind::Zero;
        out.slope = -kInf;
        return out;
    }
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / ys.size();
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    out.slope = sxy / sxx;
    if (out.slope > 0.1) {
        out.kind = IndexClass::Kind::Infinite;
        out.value = kInf;
    } else if (out.slope < -0.1) {
        out.kind = IndexClass::Kind::Zero;
    } else {
        out.kind = IndexClass::Kind::Finite;
        out.value = mean;
    }
    return out;
}

IndexClass classify_order_index(const LevyMeasure& measure, int r, const std::vector<double>& eps_list,
                                const std::vector<double>& apertures, int direction_count) {
    if (apertures.empty()) throw InvalidArgument("aperture list is empty");
    std::vector<IndexClass> verdicts;
    for (double a : apertures)
        verdicts.push_back(classify_index(order_index_profile(measure, r, a, eps_list, direction_count)));
    const auto smallest = std::min_element(apertures.begin(), apertures.end()) - apertures.begin();
    IndexClass out = verdicts[smallest];
    for (const auto& v : verdicts) out.aperture_stable = out.aperture_stable && v.kind == out.kind;
    return out;
}

IndexClass classify_lower_index(const LevyMeasure& measure, const std::vector<double>& eps_list,
                                int direction_count) {
    return classify_index(lower_index_profile(measure, eps_list, direction_count));
}

bool diverges(const std::vector<double>& masses, double growth_factor) {
    for (std::size_t i = 1; i < masses.size(); ++i)
        if (masses[i] < masses[i - 1]) return false;
    const auto first = std::find_if(masses.begin(), masses.end(), [](double m) { return m > 0.0; });
    if (first == masses.end() || first + 1 == masses.end()) return false;
    return masses.back() >= growth_factor * *first;
}

WideConeReport wide_cone_check(const LevyMeasure& measure, double aperture, int direction_count,
                               std::vector<double> floors, double growth_factor) {
    check_aperture(aperture);
    WideConeReport out;
    out.aperture = aperture;
    out.floors = std::move(floors);
    out.holds = true;
    double witness_mass = kInf;
    for (const auto& v : index_directions(measure.dim(), direction_count)) {
        const Cone cone(v, aperture);
        WideConeDirection d;
        d.axis = v;
        for (double f : out.floors) d.masses.push_back(mass_above(measure, f, cone));
        d.divergent = diverges(d.masses, growth_factor);
        if (!d.divergent) {
            out.holds = false;
            // Report the emptiest bounded cone as the witness.
            if (d.masses.back() < witness_mass) {
                witness_mass = d.masses.back();
                out.witness = v;
            }
        }
        out.directions.push_back(std::move(d));
    }
    return out;
}

MomentReport moment_checks(const LevyMeasure& measure, const std::vector<double>& p_list) {
    MomentReport out;
    const auto extra2 = measure.extended_atoms(2);
    const auto extra4 = measure.extended_atoms(4);

    // Atom tails: compare the increments from N to 2N and from 2N to 4N;
    // a convergent series must at least halve its increment.
    const auto atom_sum = [&](const std::vector<Atom>& atoms, auto&& term) {
        double s = 0.0;
        for (const auto& a : atoms) s += term(a);
        return s;
    };
    const auto converges = [&](auto&& term, double& value) {
        const double s1 = atom_sum(measure.atoms(), term);
        const double s2 = s1 + atom_sum(extra2, term);
        const double s4 = s1 + atom_sum(extra4, term);
        value = s4;
        return std::isfinite(s4) && (s4 - s2) <= 0.5 * (s2 - s1) + 1e-12 * std::abs(s4);
    };

    const auto small = [](const Atom& a) {
        const double n = a.location.norm();
        return n <= 1.0 ? a.weight * n : 0.0;
    };
    double value = 0.0;
    bool ok = converges(small, value);
    for (const auto& ray : measure.rays()) value += ray.weight * radial_power_integral(*ray.profile, 1.0, 0.0, 1.0);
    out.first_moment_small_jumps = ok && std::isfinite(value);
    out.first_moment_value = out.first_moment_small_jumps ? value : kInf;

    for (double p : p_list) {
        const auto big = [p](const Atom& a) {
            const double n = a.location.norm();
            return n > 1.0 ? a.weight * std::pow(n, p) : 0.0;
        };
        double v = 0.0;
        bool finite = converges(big, v);
        for (const auto& ray : measure.rays())
            v += ray.weight * radial_power_integral(*ray.profile, p, 1.0, kInf);
        finite = finite && std::isfinite(v);
        out.big_jump_moments.emplace_back(p, finite);
        out.big_jump_values.push_back(finite ? v : kInf);
    }
    return out;
}

}  // namespace levylab
