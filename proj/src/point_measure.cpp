#include "levylab/point_measure.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <random>

namespace levylab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kKnots = 4096;
constexpr char kMagic[8] = {'L', 'V', 'Y', 'P', 'C', 'F', 'G', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& os, T value) {
    std::uint64_t bits = 0;
    if constexpr (std::is_same_v<T, double>)
        bits = std::bit_cast<std::uint64_t>(value);
    else
        bits = static_cast<std::uint64_t>(value);
    char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
    os.write(buf, sizeof(T));
}

template <typename T>
T get(std::istream& is) {
    unsigned char buf[sizeof(T)];
    if (!is.read(reinterpret_cast<char*>(buf), sizeof(T))) throw IoError("truncated configuration dump");
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    if constexpr (std::is_same_v<T, double>)
        return std::bit_cast<double>(bits);
    else
        return static_cast<T>(bits);
}

}  // namespace

void PointConfiguration::validate() const {
    if (!(t1 > t0)) throw InvalidArgument("empty time window");
    for (std::size_t i = 0; i < events.size(); ++i) {
        const auto& e = events[i];
        if (!(e.tau >= t0 && e.tau < t1)) throw InvalidArgument("event time outside the window");
        if (i > 0 && !(e.tau > events[i - 1].tau)) throw InvalidArgument("event times not strictly increasing");
        if (e.u.size() != dim) throw InvalidArgument("event mark dimension mismatch");
        if (!(e.u.norm() >= eps_cut)) throw InvalidArgument("event mark below the cutoff");
    }
}

std::string to_string(SmallJumpMode mode) {
    return mode == SmallJumpMode::Drop ? "Drop" : "GaussianMatch";
}

std::string to_string(Compensation c) {
    return c == Compensation::LevyKhintchine ? "LevyKhintchine" : "None";
}

Vector compensator_drift(const LevyMeasure& measure, double eps_cut) {
    if (!(eps_cut > 0.0 && eps_cut <= 1.0)) throw InvalidArgument("eps_cut must lie in (0, 1]");
    return first_moment_vector(measure, eps_cut, 1.0);
}

CutoffScheme CutoffScheme::make(const LevyMeasure& measure, double eps_cut, SmallJumpMode mode,
                                Compensation compensation) {
    CutoffScheme s;
    s.eps_cut = eps_cut;
    s.mode = mode;
    s.compensation = compensation;
    s.compensator = compensation == Compensation::LevyKhintchine ? compensator_drift(measure, eps_cut)
                                                                 : Vector::Zero(measure.dim());
    if (mode == SmallJumpMode::GaussianMatch) s.covariance = second_moment_matrix(measure, eps_cut);
    return s;
}

double default_eps_cut(const LevyMeasure& measure, double max_rate) {
    double floor = 1e-300;
    if (!measure.atoms().empty() && measure.rays().empty()) {
        floor = kInf;
        for (const auto& a : measure.atoms()) floor = std::min(floor, a.location.norm());
        floor = std::min(floor, 1.0);
    }
    if (mass_above(measure, floor) <= max_rate) return floor;
    // Bisection in log(eps) on the nonincreasing map eps -> Pi(|u| >= eps).
    double lo = std::log(floor), hi = 0.0;
    if (mass_above(measure, 1.0) > max_rate) return 1.0;
    for (int it = 0; it < 200 && hi - lo > 1e-10; ++it) {
        const double mid = 0.5 * (lo + hi);
        (mass_above(measure, std::exp(mid)) <= max_rate ? hi : lo) = mid;
    }
    return std::exp(hi);
}

AliasTable::AliasTable(const std::vector<double>& weights) {
    const std::size_t n = weights.size();
    if (n == 0) throw InvalidArgument("alias table needs at least one weight");
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidArgument("alias weights must be finite and >= 0");
        total += w;
    }
    if (!(total > 0.0)) throw InvalidArgument("alias weights sum to zero");
    prob_.assign(n, 0.0);
    alias_.assign(n, 0);
    std::vector<double> scaled(n);
    std::vector<std::size_t> small, large;
    for (std::size_t i = 0; i < n; ++i) {
        scaled[i] = weights[i] * static_cast<double>(n) / total;
        (scaled[i] < 1.0 ? small : large).push_back(i);
    }
    while (!small.empty() && !large.empty()) {
        const std::size_t s = small.back(), l = large.back();
        small.pop_back();
        prob_[s] = scaled[s];
        alias_[s] = l;
        scaled[l] = (scaled[l] + scaled[s]) - 1.0;
        if (scaled[l] < 1.0) {
            large.pop_back();
            small.push_back(l);
        }
    }
    for (std::size_t i : large) prob_[i] = 1.0, alias_[i] = i;
    for (std::size_t i : small) prob_[i] = 1.0, alias_[i] = i;
}

RadialSampler::RadialSampler(const RadialProfile& profile, double floor) {
    const double lo = std::max(floor, profile.rho_min);
    if (!(profile.rho_max > lo)) return;
    const bool bounded = std::isfinite(profile.rho_max);
    const double hi = bounded ? profile.rho_max : std::max(1e8, lo * 1e6);
    const double step = std::log(hi / lo) / (kKnots - 1);
    const auto& logpi = profile.log_density;
    knots_.resize(kKnots);
    for (int k = 0; k < kKnots; ++k) knots_[k] = k + 1 == kKnots ? hi : lo * std::exp(k * step);
    cum_.assign(kKnots, 0.0);
    slope_.assign(kKnots - 1, 1.0);
    for (int k = 0; k + 1 < kKnots; ++k) {
        cum_[k + 1] = cum_[k] + radial_power_integral(profile, 0.0, knots_[k], knots_[k + 1]);
        const double la = logpi(std::log(knots_[k])), lb = logpi(std::log(knots_[k + 1]));
        if (std::isfinite(la) && std::isfinite(lb)) slope_[k] = -(lb - la) / std::log(knots_[k + 1] / knots_[k]);
    }
    if (!bounded) {
        tail_ = radial_power_integral(profile, 0.0, hi, kInf);
        tail_beta_ = slope_.back();
    }
    total_ = cum_.back() + tail_;
    if (!std::isfinite(total_)) throw InvalidArgument("radial mass above the cutoff is not finite");
}

double RadialSampler::quantile(double p) const {
    const double target = p * total_;
    if (target < cum_.back() || tail_ <= 0.0) {
        auto it = std::upper_bound(cum_.begin(), cum_.end(), target);
        std::size_t k = it == cum_.begin() ? 0 : static_cast<std::size_t>(it - cum_.begin()) - 1;
        k = std::min(k, knots_.size() - 2);
        const double width = cum_[k + 1] - cum_[k];
        const double f = width > 0.0 ? std::clamp((target - cum_[k]) / width, 0.0, 1.0) : 0.5;
        const double a = knots_[k], x = std::log(knots_[k + 1] / a);
        const double g = 1.0 - slope_[k];
        if (std::abs(g * x) < 1e-9) return a * std::exp(f * x);
        return a * std::exp(std::log1p(f * std::expm1(g * x)) / g);
    }
    const double q = std::clamp((target - cum_.back()) / tail_, 0.0, 1.0 - 1e-16);
    if (tail_beta_ <= 1.0) return knots_.back();
    return knots_.back() * std::pow(1.0 - q, -1.0 / (tail_beta_ - 1.0));
}

ConfigurationSampler::ConfigurationSampler(const LevyMeasure& measure, double eps_cut, double event_budget)
    : dim_(measure.dim()), eps_cut_(eps_cut), budget_(event_budget) {
    if (!(eps_cut > 0.0 && eps_cut <= 1.0)) throw InvalidArgument("eps_cut must lie in (0, 1]");
    std::vector<double> weights;
    for (const auto& a : measure.atoms()) {
        if (a.location.norm() < eps_cut) continue;
        pieces_.push_back({a.location, -1});
        weights.push_back(a.weight);
    }
    // Rays sharing a profile share one radial sampler.
    std::vector<const RadialProfile*> seen;
    for (const auto& ray : measure.rays()) {
        const auto it = std::find(seen.begin(), seen.end(), ray.profile.get());
        int index = static_cast<int>(it - seen.begin());
        if (it == seen.end()) {
            seen.push_back(ray.profile.get());
            radial_.emplace_back(*ray.profile, eps_cut);
        }
        const double m = ray.weight * radial_[index].mass();
        if (m <= 0.0) continue;
        pieces_.push_back({ray.direction, index});
        weights.push_back(m);
    }
    for (double w : weights) rate_ += w;
    if (!std::isfinite(rate_)) throw RateOverflow("retained jump rate is not finite");
    if (rate_ > 0.0) alias_ = AliasTable(weights);
}

PointConfiguration ConfigurationSampler::sample(double t0, double t1, std::uint64_t seed,
                                                std::uint64_t replica) const {
    Engine engine(seed, replica);
    auto out = sample(t0, t1, engine);
    out.seed = seed;
    out.replica = replica;
    return out;
}

PointConfiguration ConfigurationSampler::sample(double t0, double t1, Engine& engine) const {
    if (!(t1 > t0)) throw InvalidArgument("empty time window");
    PointConfiguration out;
    out.t0 = t0;
    out.t1 = t1;
    out.dim = dim_;
    out.eps_cut = eps_cut_;
    const double lambda = rate_ * (t1 - t0);
    if (lambda > budget_)
        throw RateOverflow("expected event count " + std::to_string(lambda) + " exceeds the budget " +
                           std::to_string(budget_));
    if (lambda <= 0.0) return out;
    std::poisson_distribution<long long> count_law(lambda);
    const long long n = count_law(engine);
    out.events.resize(static_cast<std::size_t>(n));
    for (auto& e : out.events) {
        e.tau = t0 + (t1 - t0) * uniform_open01(engine);
        draw_mark(engine, e.u);
        e.aux = uniform_open01(engine);
    }
    const auto by_time = [](const Event& a, const Event& b) { return a.tau < b.tau; };
    std::sort(out.events.begin(), out.events.end(), by_time);
    // Coincident times have probability zero; resample instead of ordering them.
    for (bool clash = true; clash;) {
        clash = false;
        for (std::size_t i = 1; i < out.events.size(); ++i)
            if (out.events[i].tau == out.events[i - 1].tau) {
                out.events[i].tau = t0 + (t1 - t0) * uniform_open01(engine);
                clash = true;
            }
        if (clash) std::sort(out.events.begin(), out.events.end(), by_time);
    }
    return out;
}

PointConfiguration sample_configuration(const LevyMeasure& measure, double t0, double t1, double eps_cut,
                                        std::uint64_t seed, std::uint64_t replica) {
    return ConfigurationSampler(measure, eps_cut).sample(t0, t1, seed, replica);
}

std::vector<Vector> evaluate_levy_path(const PointConfiguration& config, const CutoffScheme& scheme,
                                       const std::vector<double>& times) {
    if (scheme.compensator.size() != config.dim) throw InvalidArgument("scheme dimension mismatch");
    std::vector<Vector> out;
    out.reserve(times.size());
    Vector jumps = Vector::Zero(config.dim);
    Vector gauss = Vector::Zero(config.dim);
    std::size_t next = 0;
    double last = config.t0;
    Matrix root;
    std::optional<Engine> engine;
    if (scheme.mode == SmallJumpMode::GaussianMatch && scheme.covariance) {
        Eigen::SelfAdjointEigenSolver<Matrix> eig(*scheme.covariance);
        root = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
        engine.emplace(splitmix64(config.seed ^ 0x6761757373ull), config.replica);
    }
    for (double t : times) {
        if (t < last || t > config.t1) throw InvalidArgument("evaluation times must be sorted inside the window");
        while (next < config.events.size() && config.events[next].tau <= t) jumps += config.events[next++].u;
        if (engine) {
            Vector z(config.dim);
            for (int i = 0; i < config.dim; ++i) z(i) = standard_normal(*engine);
            gauss += std::sqrt(t - last) * root * z;
        }
        last = t;
        out.push_back(jumps - (t - config.t0) * scheme.compensator + gauss);
    }
    return out;
}

void write_configuration(std::ostream& os, const PointConfiguration& config, bool with_aux) {
    os.write(kMagic, sizeof kMagic);
    put<std::uint32_t>(os, kVersion);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(config.dim));
    put<double>(os, config.t0);
    put<double>(os, config.t1);
    put<double>(os, config.eps_cut);
    put<std::uint64_t>(os, config.seed);
    put<std::uint64_t>(os, config.events.size());
    put<std::uint32_t>(os, with_aux ? 1u : 0u);
    put<std::uint32_t>(os, 0u);
    for (const auto& e : config.events) {
        put<double>(os, e.tau);
        for (int i = 0; i < config.dim; ++i) put<double>(os, e.u(i));
        if (with_aux) put<double>(os, e.aux);
    }
    if (!os) throw IoError("failed to write configuration dump");
}

PointConfiguration read_configuration(std::istream& is) {
    char magic[8];
    if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
        throw IoError("not a configuration dump");
    if (get<std::uint32_t>(is) != kVersion) throw IoError("unsupported configuration dump version");
    PointConfiguration c;
    c.dim = static_cast<int>(get<std::uint32_t>(is));
    check_dim(c.dim);
    c.t0 = get<double>(is);
    c.t1 = get<double>(is);
    c.eps_cut = get<double>(is);
    c.seed = get<std::uint64_t>(is);
    const auto count = get<std::uint64_t>(is);
    const bool aux = get<std::uint32_t>(is) & 1u;
    get<std::uint32_t>(is);
    c.events.resize(count);
    for (auto& e : c.events) {
        e.tau = get<double>(is);
        e.u.resize(c.dim);
        for (int i = 0; i < c.dim; ++i) e.u(i) = get<double>(is);
        if (aux) e.aux = get<double>(is);
    }
    return c;
}

}  // namespace levylab
