#include "levylab/sde.hpp"

#include "levylab/parallel.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

namespace levylab {

namespace {

constexpr double kBlowUp = 1e12;

double spectral_norm(const Matrix& M) {
    if (M.rows() == 1) return std::abs(M(0, 0));
    return Eigen::JacobiSVD<Matrix>(M).singularValues()(0);
}

// exp([[A, b], [0, 0]] d): top-left block e^{Ad}, top-right int_0^d e^{sA} ds b.
Eigen::MatrixXd affine_exp(const Matrix& A, const Vector& b, double d) {
    const int m = static_cast<int>(A.rows());
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(m + 1, m + 1);
    G.topLeftCorner(m, m) = A * d;
    G.topRightCorner(m, 1) = b * d;
    return G.exp();
}

void check_state(const Vector& x, double t) {
    if (!x.allFinite() || x.norm() > kBlowUp)
        throw BlowUp("state norm exceeded 1e12 at t = " + std::to_string(t));
}

}  // namespace

std::string to_string(Integrator method) {
    switch (method) {
        case Integrator::RK4: return "RK4";
        case Integrator::ExactLinear: return "ExactLinear";
    }
    return "?";
}

std::size_t PathRecord::index_at(double t) const {
    if (times.empty() || t < times.front()) throw InvalidArgument("time before the start of the path");
    return static_cast<std::size_t>(std::upper_bound(times.begin(), times.end(), t) - times.begin()) - 1;
}

const Vector& PathRecord::state_at(double t) const { return states[index_at(t)]; }

PathRecord solve_path(const DriftField& a, const PointConfiguration& config, const CutoffScheme& scheme,
                      const Vector& x0, double step, Integrator method) {
    if (!(step > 0.0)) throw InvalidArgument("step must be positive");
    if (x0.size() != a.dim() || config.dim != a.dim() || scheme.compensator.size() != a.dim())
        throw InvalidArgument("drift, configuration, scheme and x0 dimensions differ");
    if (!x0.allFinite()) throw InvalidArgument("x0 must be finite");
    if (method == Integrator::ExactLinear && !a.is_linear())
        throw InvalidArgument("ExactLinear needs a linear drift");
    const int m = a.dim();

    PathRecord path;
    path.dim = m;
    path.step = step;
    path.method = method;
    path.config = config;
    path.scheme = scheme;

    const Vector b = -scheme.compensator;
    const auto field = [&](const Vector& x) -> Vector { return a(x) + b; };
    const auto rk4 = [&](const Vector& x, double d) -> Vector {
        const Vector k1 = field(x);
        const Vector k2 = field(x + 0.5 * d * k1);
        const Vector k3 = field(x + 0.5 * d * k2);
        const Vector k4 = field(x + d * k3);
        return x + d / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    };
    std::optional<Eigen::MatrixXd> full_step;
    const auto exact = [&](const Vector& x, double d) -> Vector {
        const Eigen::MatrixXd E = (d == step && full_step) ? *full_step : affine_exp(a.matrix(), b, d);
        if (d == step && !full_step) full_step = E;
        return E.topLeftCorner(m, m) * x + E.topRightCorner(m, 1);
    };

    Matrix root;
    std::optional<Engine> engine;
    if (scheme.mode == SmallJumpMode::GaussianMatch && scheme.covariance) {
        Eigen::SelfAdjointEigenSolver<Matrix> eig(*scheme.covariance);
        root = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
        engine.emplace(splitmix64(config.seed ^ 0x6761757373ull), config.replica);
    }

    double t = config.t0;
    Vector x = x0;
    path.times.push_back(t);
    path.states.push_back(x);
    std::size_t next = 0;
    while (true) {
        const bool have_event = next < config.events.size();
        const double target = have_event ? config.events[next].tau : config.t1;
        // grid times are segment start + i * step so long segments do not drift
        const double start = t;
        for (std::size_t i = 1; t < target; ++i) {
            double next_t = start + static_cast<double>(i) * step;
            if (target - next_t < 1e-12 * std::max(1.0, std::abs(target))) next_t = target;
            const double d = next_t - t;
            x = method == Integrator::ExactLinear ? exact(x, d) : rk4(x, d);
            if (engine) {
                Vector z(m);
                for (int r = 0; r < m; ++r) z(r) = standard_normal(*engine);
                x += std::sqrt(d) * root * z;
            }
            t = next_t;
            check_state(x, t);
            path.times.push_back(t);
            path.states.push_back(x);
        }
        if (!have_event) break;
        const Event& e = config.events[next];
        JumpRecord j;
        j.event = next;
        j.grid = path.times.size() - 1;
        j.tau = e.tau;
        j.before = x;
        x += e.u;
        check_state(x, t);
        j.after = x;
        path.states.back() = x;
        path.jumps.push_back(std::move(j));
        ++next;
    }
    return path;
}

void stochastic_exponent(PathRecord& path, const DriftField& a) {
    const int m = path.dim;
    if (a.dim() != m) throw InvalidArgument("drift and path dimensions differ");
    const std::size_t n = path.times.size();
    path.exponent.assign(n, Matrix::Identity(m, m));
    path.exponent_inverse.assign(n, Matrix::Identity(m, m));
    const Vector b = -path.scheme.compensator;

    // Joint RK4 for (X, E, E^{-1}) restarted from the stored post-jump state of
    // every grid point. Constant gradients use the exact propagator e^{Ad},
    // cached per step length, which also covers the sparse ExactLinear grid.
    const bool constant = a.is_linear();
    const Eigen::MatrixXd A = constant ? Eigen::MatrixXd(a.matrix()) : Eigen::MatrixXd();
    double cached_d = -1.0;
    Matrix Ed, Fd;
    for (std::size_t k = 0; k + 1 < n; ++k) {
        const double d = path.times[k + 1] - path.times[k];
        const Matrix& E = path.exponent[k];
        const Matrix& F = path.exponent_inverse[k];
        if (constant) {
            if (d != cached_d) {
                Ed = Eigen::MatrixXd((A * d).exp());
                Fd = Eigen::MatrixXd((-A * d).exp());
                cached_d = d;
            }
            path.exponent[k + 1] = Ed * E;
            path.exponent_inverse[k + 1] = F * Fd;
            continue;
        }
        const Vector& x = path.states[k];
        const auto field = [&](const Vector& y) -> Vector { return a(y) + b; };
        const Vector x1 = field(x);
        const Matrix G1 = a.gradient(x);
        const Matrix k1 = G1 * E, l1 = -F * G1;
        const Vector xa = x + 0.5 * d * x1;
        const Matrix G2 = a.gradient(xa);
        const Matrix k2 = G2 * (E + 0.5 * d * k1), l2 = -(F + 0.5 * d * l1) * G2;
        const Vector x2 = field(xa);
        const Vector xb = x + 0.5 * d * x2;
        const Matrix G3 = a.gradient(xb);
        const Matrix k3 = G3 * (E + 0.5 * d * k2), l3 = -(F + 0.5 * d * l2) * G3;
        const Vector x3 = field(xb);
        const Matrix G4 = a.gradient(x + d * x3);
        const Matrix k4 = G4 * (E + d * k3), l4 = -(F + d * l3) * G4;
        path.exponent[k + 1] = E + d / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        path.exponent_inverse[k + 1] = F + d / 6.0 * (l1 + 2.0 * l2 + 2.0 * l3 + l4);
    }
    double defect = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double scale = std::max(1.0, path.exponent[k].norm() * path.exponent_inverse[k].norm());
        defect = std::max(defect, (path.exponent[k] * path.exponent_inverse[k] - Matrix::Identity(m, m)).norm() / scale);
    }
    if (defect > 1e-6) throw IllConditioned("exponent defect |E E^-1 - I| = " + std::to_string(defect));
    path.bounds = exponent_bounds(path, a);
}

ExponentBounds exponent_bounds(const PathRecord& path, const DriftField& a) {
    if (path.exponent.size() != path.times.size()) throw InvalidArgument("exponent not computed");
    ExponentBounds out;
    const int m = path.dim;
    for (const auto& x : path.states) out.C = std::max(out.C, spectral_norm(a.gradient(x)));
    for (const auto& j : path.jumps) out.C = std::max(out.C, spectral_norm(a.gradient(j.before)));
    out.horizon = path.times.back() - path.times.front();
    out.min_log_det_margin = out.min_norm_margin = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < path.times.size(); ++k) {
        const double tc = (path.times[k] - path.times.front()) * out.C;
        const double det = path.exponent[k].determinant();
        out.min_log_det_margin = std::min(out.min_log_det_margin, det > 0.0 ? std::log(det) + m * tc : -kBlowUp);
        const double ne = std::log(spectral_norm(path.exponent[k]));
        const double ni = std::log(spectral_norm(path.exponent_inverse[k]));
        out.min_norm_margin = std::min({out.min_norm_margin, tc - std::abs(ne), tc - std::abs(ni)});
    }
    const double slack = 1e-9 * (1.0 + out.horizon * out.C * m);
    out.holds = out.min_log_det_margin >= -slack && out.min_norm_margin >= -slack;
    return out;
}

Vector derivative_process(const PathRecord& path, const DriftField& a, const TimeStretch& stretch,
                          const MarkSet& gamma, std::optional<double> t) {
    if (path.exponent.size() != path.times.size()) throw InvalidArgument("exponent not computed");
    const double at = t.value_or(path.times.back());
    const std::size_t k = path.index_at(at);
    if (path.times[k] != at) throw InvalidArgument("derivative requested off the path grid");
    Vector sum = Vector::Zero(path.dim);
    for (const auto& j : path.jumps) {
        if (j.grid > k) break;
        const Event& e = path.config.events[j.event];
        if (!gamma(e.u, e.aux)) continue;
        const double jh = stretch.Jh(j.tau);
        if (jh == 0.0) continue;
        sum += jh * (path.exponent_inverse[j.grid] * a.delta(j.before, e.u));
    }
    return path.exponent[k] * sum;
}

GridDerivative malliavin_matrix(const PathRecord& path, const DriftField& a, const DifferentialGrid& grid,
                                std::optional<double> t) {
    if (path.exponent.size() != path.times.size()) throw InvalidArgument("exponent not computed");
    const double at = t.value_or(path.times.back());
    const std::size_t k = path.index_at(at);
    if (path.times[k] != at) throw InvalidArgument("Malliavin matrix requested off the path grid");

    std::map<std::pair<long long, double>, std::size_t> slot;
    GridDerivative out;
    for (const auto& j : path.jumps) {
        if (j.grid > k) break;
        const Event& e = path.config.events[j.event];
        const auto cell = grid.cell_of(j.tau, e.u, e.aux);
        if (!cell) continue;
        const auto key = std::make_pair(cell->annulus, cell->sub);
        auto it = slot.find(key);
        if (it == slot.end()) {
            it = slot.emplace(key, out.cells.size()).first;
            out.cells.push_back(*cell);
            out.g.push_back(Vector::Zero(path.dim));
        }
        const double jh = grid.stretch(*cell).Jh(j.tau);
        if (jh != 0.0) out.g[it->second] += jh * (path.exponent_inverse[j.grid] * a.delta(j.before, e.u));
    }
    out.sigma = Matrix::Zero(path.dim, path.dim);
    for (auto& g : out.g) {
        g = path.exponent[k] * g;
        out.sigma += g * g.transpose();
    }
    out.lambda_min = Eigen::SelfAdjointEigenSolver<Matrix>(out.sigma, Eigen::EigenvaluesOnly).eigenvalues()(0);
    out.nondegenerate = out.lambda_min > 1e-10;
    return out;
}

Vector linear_endpoint(const Matrix& A, const PointConfiguration& config, const CutoffScheme& scheme,
                       const Vector& x0) {
    if (scheme.mode != SmallJumpMode::Drop) throw InvalidArgument("linear endpoint supports the Drop scheme only");
    const double T = config.t1 - config.t0;
    if (A.rows() == 1) {
        const double a = A(0, 0);
        const double drift_int = a == 0.0 ? T : std::expm1(a * T) / a;
        double x = std::exp(a * T) * x0(0) - drift_int * scheme.compensator(0);
        for (const auto& e : config.events) x += std::exp(a * (config.t1 - e.tau)) * e.u(0);
        return Vector::Constant(1, x);
    }
    const int m = static_cast<int>(A.rows());
    const Eigen::MatrixXd E = affine_exp(A, -scheme.compensator, T);
    Vector x = E.topLeftCorner(m, m) * x0 + E.topRightCorner(m, 1);
    for (const auto& e : config.events) x += Matrix((A * (config.t1 - e.tau)).exp()) * e.u;
    return x;
}

std::vector<Vector> sample_endpoints(const DriftField& a, const LevyMeasure& measure, const CutoffScheme& scheme,
                                     const Vector& x0, double t, std::uint64_t seed, std::size_t count,
                                     const EndpointOptions& options, std::uint64_t first) {
    if (!(t > 0.0)) throw InvalidArgument("endpoint time must be positive");
    const ConfigurationSampler sampler(measure, scheme.eps_cut, options.event_budget);
    const bool linear = a.is_linear() && scheme.mode == SmallJumpMode::Drop;
    std::vector<Vector> out(count);
    parallel_for(count, options.jobs, [&](std::size_t i) {
        const auto config = sampler.sample(0.0, t, seed, first + i);
        if (linear) {
            out[i] = linear_endpoint(a.matrix(), config, scheme, x0);
        } else {
            out[i] = solve_path(a, config, scheme, x0, options.step).end_state();
        }
        check_state(out[i], t);
    });
    return out;
}

StationarySamples stationary_sample(const DriftField& a, const LevyMeasure& measure, const CutoffScheme& scheme,
                                    std::size_t n_samples, std::uint64_t seed, std::optional<double> burn_in,
                                    const EndpointOptions& options) {
    StationarySamples out;
    const auto diss = dissipativity_check(a, 1.0);
    if (!diss.holds)
        out.warnings.push_back("drift is not dissipative (gamma estimate " + std::to_string(diss.gamma_estimate) +
                               "); stationary samples may not exist");
    out.burn_in = burn_in.value_or(diss.holds ? 20.0 / diss.gamma_estimate : 20.0);
    out.samples = sample_endpoints(a, measure, scheme, Vector::Zero(a.dim()), out.burn_in, seed, n_samples, options);
    return out;
}

void write_path_csv(std::ostream& os, const PathRecord& path) {
    const auto old = os.precision(17);
    os << "t";
    for (int i = 1; i <= path.dim; ++i) os << ",X" << i;
    os << ",jump\n";
    std::size_t j = 0;
    for (std::size_t k = 0; k < path.times.size(); ++k) {
        bool jump = false;
        while (j < path.jumps.size() && path.jumps[j].grid == k) {
            jump = true;
            ++j;
        }
        os << path.times[k];
        for (int i = 0; i < path.dim; ++i) os << ',' << path.states[k](i);
        os << ',' << (jump ? 1 : 0) << '\n';
    }
    os.precision(old);
    if (!os) throw IoError("failed to write path CSV");
}

}  // namespace levylab
