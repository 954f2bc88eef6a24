#include "levylab/quadrature.hpp"
#include "levylab/variations.hpp"

#include <catch_amalgamated.hpp>

#include <chrono>
#include <cmath>
#include <set>

using namespace levylab;
using Catch::Approx;

namespace {

PointConfiguration single_event(double tau, double t1 = 1.0, double mark = 1.0) {
    PointConfiguration c;
    c.t0 = 0.0;
    c.t1 = t1;
    c.events.push_back({tau, Vector::Constant(1, mark), 0.5});
    return c;
}

}  // namespace

TEST_CASE("flow closed forms for h = 1 on [0, 1]") {
    const auto h = TimeStretch::indicator(0.0, 1.0);
    // RK4 at step 1e-4 loses a few digits crossing the kink of Jh at 1
    CHECK(time_stretch_map(h, 1.0, 0.5) == Approx(2.0 - std::log(2.0)).margin(1e-9));
    CHECK(time_stretch_map(h, -1.0, 0.5) == Approx(0.5 / std::exp(1.0)).margin(1e-12));
    CHECK(StretchFlow(h, 1.0)(0.5) == Approx(2.0 - std::log(2.0)).margin(1e-10));
    CHECK(stretch_rate(h, 0.5) == Approx(std::log(2.0)).epsilon(1e-9));
    CHECK(stretch_offset(h) == Approx(1.0).epsilon(1e-12));
    CHECK(stretch_offset(h, -0.5) == Approx(-0.5).epsilon(1e-12));
    // beyond the support the flow is a translation by J_inf
    CHECK(time_stretch_map(h, 1.0, 3.0) == 4.0);
    CHECK(time_stretch_map(h, 1.0, 0.0) == 0.0);
}

TEST_CASE("shape integrals match quadrature of h") {
    const std::vector<TimeStretch> shapes{
        TimeStretch::indicator(0.2, 0.7, 1.5), TimeStretch::grid_bump(0.0, 1.0, 0.2, 0.8),
        TimeStretch::sine_bump(0.1, 0.9, 2.0), TimeStretch::tabulated({0.0, 0.3, 0.6, 1.0}, {0.0, 2.0, -1.0, -0.5})};
    for (const auto& s : shapes) {
        for (double x : {0.05, 0.15, 0.33, 0.5, 0.71, 0.95, 1.2}) {
            // split at every kink of the shapes above
            std::vector<double> cuts{0.0};
            for (double c : {0.1, 0.2, 0.3, 0.6, 0.7, 0.8, 0.9, 1.0})
                if (c < x) cuts.push_back(c);
            cuts.push_back(x);
            double q = 0.0;
            for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
                q += integrate_finite([&](double y) { return s.h(y); }, cuts[i], cuts[i + 1], 1e-10).value;
            INFO(s.describe() << " at " << x);
            CHECK(s.Jh(x) == Approx(q).margin(1e-9));
        }
    }
    CHECK(smoothstep(0.5) == Approx(0.5).epsilon(1e-15));
    CHECK(smoothstep(0.3) + smoothstep(0.7) == Approx(1.0).epsilon(1e-15));
    for (double x : {0.1, 0.4, 0.8}) {
        const double fd = (smoothstep(x + 1e-6) - smoothstep(x - 1e-6)) / 2e-6;
        CHECK(smoothstep_derivative(x) == Approx(fd).epsilon(1e-7));
    }
}

TEST_CASE("grid compatibility") {
    CHECK(TimeStretch::grid_bump(0.0, 1.0, 0.25).grid_compatible());
    CHECK(TimeStretch::sine_bump(0.0, 1.0).grid_compatible());
    CHECK_FALSE(TimeStretch::sine_bump(0.0, 1.0, -1.0).grid_compatible());
    CHECK_FALSE(TimeStretch::indicator(0.0, 1.0).grid_compatible());
    CHECK(TimeStretch::tabulated({0.0, 0.5, 1.0}, {1.0, 0.0, -1.0}).grid_compatible());
    CHECK_FALSE(TimeStretch::tabulated({0.0, 0.5, 1.0}, {1.0, 0.0, -0.5}).grid_compatible());
    CHECK_FALSE(TimeStretch::zero().grid_compatible());
}

TEST_CASE("group law, inverse and interval preservation") {
    const auto h = TimeStretch::sine_bump(0.2, 1.4, 1.3);
    const auto g = TimeStretch::grid_bump(0.0, 1.0, 0.3, 1.0);
    for (double x : {0.0, 0.25, 0.5, 0.9, 1.3, 2.0}) {
        for (double s : {0.4, -0.7, 1.5}) {
            const double composed = time_stretch_map(h, s, time_stretch_map(h, 0.6, x));
            CHECK(composed == Approx(time_stretch_map(h, s + 0.6, x)).margin(1e-11));
        }
        CHECK(time_stretch_map(h, -1.0, time_stretch_map(h, 1.0, x)) == Approx(x).margin(1e-12));
        CHECK(time_stretch_map(g, -2.0, time_stretch_map(g, 2.0, x)) == Approx(x).margin(1e-12));
    }
    double prev = -1.0;
    for (int k = 0; k <= 200; ++k) {
        const double x = 0.2 + 1.2 * k / 200.0;
        const double y = time_stretch_map(h, 1.0, x);
        CHECK(y >= 0.2);
        CHECK(y <= 1.4);
        CHECK(y >= prev);
        prev = y;
    }
    CHECK(time_stretch_map(h, 1.0, 1.4) == 1.4);
}

TEST_CASE("rate by the flow identity matches quadrature") {
    const auto h = TimeStretch::sine_bump(0.0, 1.0, 1.7);
    for (double t : {0.1, 0.3, 0.5, 0.77, 0.95})
        for (double s : {1.0, -1.0, 0.25})
            CHECK(stretch_rate(h, t, s) == Approx(stretch_rate_quadrature(h, t, s)).margin(1e-9));
    // Derivative of the flow equals exp(rate).
    const double t = 0.4, d = 1e-5;
    const double slope = (time_stretch_map(h, 1.0, t + d) - time_stretch_map(h, 1.0, t - d)) / (2 * d);
    CHECK(std::log(slope) == Approx(stretch_rate(h, t)).margin(1e-8));
    CHECK(stretch_rate(h, 1.5) == 0.0);
}

TEST_CASE("cached flow agrees with direct RK4") {
    const std::vector<std::pair<TimeStretch, double>> cases{{TimeStretch::sine_bump(0.0, 1.0, 1.0), 1.0},
                                                            {TimeStretch::grid_bump(0.0, 2.0, 0.25, 0.5), -1.0},
                                                            {TimeStretch::indicator(0.0, 1.0), -1.0},
                                                            {TimeStretch::indicator(0.5, 1.0, 2.0), 1.0}};
    for (const auto& [h, s] : cases) {
        const auto start = std::chrono::steady_clock::now();
        const StretchFlow flow(h, s);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        CHECK(secs < 1.0);
        double worst = 0.0, worst_rate = 0.0;
        for (int k = 0; k <= 499; ++k) {
            const double x = 3.0 * k / 499.0;
            worst = std::max(worst, std::abs(flow(x) - time_stretch_map(h, s, x)));
            worst_rate = std::max(worst_rate, std::abs(flow.rate(x) - stretch_rate(h, x, s)));
        }
        INFO(h.describe() << " scale " << s);
        CHECK(worst < 1e-9);
        CHECK(worst_rate < 1e-7);
    }
}

TEST_CASE("transforms move marked events backward along the flow") {
    PointConfiguration c;
    c.t1 = 2.0;
    c.eps_cut = 0.1;
    c.events = {{0.3, Vector::Constant(1, 0.1), 0.2}, {0.6, Vector::Constant(1, 2.0), 0.4},
                {1.1, Vector::Constant(1, 0.5), 0.9}};
    const auto h = TimeStretch::sine_bump(0.0, 2.0);
    const auto moved = transform_configuration(c, h, norm_band(0.2, 1.0));
    REQUIRE(moved.events.size() == 3);
    // the moved event overtakes the unmarked one and the order is restored
    CHECK(moved.events[0].tau == 0.3);
    CHECK(moved.events[1].tau == Approx(time_stretch_map(h, -1.0, 1.1)).epsilon(1e-14));
    CHECK(moved.events[1].u(0) == 0.5);
    CHECK(moved.events[2].tau == 0.6);
    moved.validate();
    const StretchFlow back(h, -1.0);
    const auto cached = transform_configuration(c, back, all_marks());
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(cached.events[i].tau == Approx(time_stretch_map(h, -1.0, c.events[i].tau)).margin(1e-10));
    // A stretch with positive J_inf pushes late events out of the window.
    CHECK_THROWS_AS(transform_configuration(single_event(0.9, 1.0), TimeStretch::indicator(0.0, 0.5), all_marks(), -1.0),
                    InvalidArgument);
}

TEST_CASE("admissibility density reweights Poisson configurations") {
    // Poisson process with intensity 3 on [0, 3); phi(nu) = sum_k sin(tau_k) + 1[tau_k < 1].
    const LevyMeasure pi(AtomicSequence::table({Atom{Vector::Constant(1, 1.0), 3.0}}));
    const ConfigurationSampler sampler(pi, 0.5);
    const auto h = TimeStretch::sine_bump(0.5, 2.5, 1.0);
    const StretchFlow forward(h, 1.0), backward(h, -1.0);
    const auto phi = [](const PointConfiguration& c) {
        double s = 0.0;
        for (const auto& e : c.events) s += std::sin(e.tau) + (e.tau < 1.0 ? 1.0 : 0.0);
        return s;
    };
    const int N = 40000;
    double lhs = 0, lhs2 = 0, rhs = 0, rhs2 = 0, pm = 0;
    for (int i = 0; i < N; ++i) {
        const auto c = sampler.sample(0.0, 3.0, 77, i);
        const double a = phi(transform_configuration(c, backward, all_marks()));
        const double p = admissibility_density(c, forward, all_marks(), 3.0);
        const double b = p * phi(c);
        lhs += a;
        lhs2 += a * a;
        rhs += b;
        rhs2 += b * b;
        pm += p;
    }
    lhs /= N;
    rhs /= N;
    const double se = std::sqrt((lhs2 / N - lhs * lhs) / N + (rhs2 / N - rhs * rhs) / N);
    CHECK(std::abs(lhs - rhs) < 4.0 * se);
    CHECK(pm / N == Approx(1.0).margin(0.02));
    // Shortcut and direct evaluation agree.
    const auto c = sampler.sample(0.0, 3.0, 5, 0);
    CHECK(admissibility_density(c, h, all_marks(), 3.0) ==
          Approx(admissibility_density(c, forward, all_marks(), 3.0)).epsilon(1e-7));
}

TEST_CASE("grid indices") {
    CHECK(grid_eps(0) == 1.0);
    CHECK(grid_eps(3) == 0.25);
    CHECK(grid_eps(-1) == 1.5);
    CHECK(grid_eps(-4) == 3.0);
    CHECK(annulus_index(1.0 / 3.0) == 1);
    CHECK(annulus_index(1.0) == -1);
    CHECK(annulus_index(0.999) == 0);
    CHECK(annulus_index(1.5) == -2);
    CHECK(annulus_index(1.49) == -1);
    for (double x = 1.3e-6; x < 1.0; x *= 1.37) {
        const long long n = annulus_index(x);
        CHECK(n == static_cast<long long>(std::floor(1.0 / x)) - 1);
        CHECK(x >= grid_eps(n + 1));
        CHECK(x < grid_eps(n));
    }
    for (double x = 1.0; x < 1e3; x *= 1.29) {
        const long long n = annulus_index(x);
        CHECK(x >= grid_eps(n + 1));
        CHECK(x < grid_eps(n));
    }
    CHECK_THROWS_AS(annulus_index(0.0), InvalidArgument);
}

TEST_CASE("grid sub-cell counts") {
    const LevyMeasure geo(AtomicSequence::geometric(std::exp(1.0)));
    const DifferentialGrid grid(geo, 1.0, 4.0, 0.25, 0.2, 1e-9);
    // Direct oracle: annulus of e^{-k} is floor(e^k) - 1, unit mass each.
    for (int k = 1; k <= 5; ++k) {
        const long long n = static_cast<long long>(std::floor(std::exp(k))) - 1;
        const Annulus A = grid.annulus(n);
        CHECK(A.mass == 1.0);
        const double third = 12.0 * std::pow(2.0, static_cast<double>(n - 1));
        const double expect = third > 1e300 ? INFINITY : std::floor(std::max(4.0, third)) + 2.0;
        CHECK(A.K == expect);
    }
    CHECK(grid.annulus(1).K == 14.0);
    CHECK(grid.annulus(6).K == 386.0);
    CHECK(grid.summed_bound() < 0.25);
    CHECK(grid.annuli().size() == 20);

    const DifferentialGrid empty(LevyMeasure::zero(1), 1.0, 4.3, 0.25, 0.2);
    for (long long n : {-5LL, 0LL, 7LL, 1000LL}) CHECK(empty.annulus(n).K == 6.0);
    CHECK(empty.annuli().empty());
    CHECK(empty.summed_bound() == 0.0);

    CHECK_THROWS_AS(DifferentialGrid(geo, 1.0, 0.0, 0.25, 0.2), InvalidParams);
    CHECK_THROWS_AS(DifferentialGrid(geo, 1.0, 4.0, 0.5, 0.2), InvalidParams);
    CHECK_THROWS_AS(DifferentialGrid(geo, 1.0, 4.0, 0.25, 0.6), InvalidParams);
}

TEST_CASE("grid cells are disjoint and cover the events") {
    const LevyMeasure geo(AtomicSequence::geometric(std::exp(1.0), 60, 0.01));
    const LevyMeasure stable(RadialDensity{1, RadialProfile::power_law(0.05, 0.6), AngularMeasure::symmetric_1d()});
    for (const auto& measure : {geo, stable}) {
        const DifferentialGrid grid(measure, 2.0, 2.0, 0.2, 0.25, 1e-2);
        CHECK(grid.summed_bound() < 0.2);
        const auto cells = grid.cells(64);
        REQUIRE(cells.size() > 4);
        for (std::size_t i = 0; i < cells.size(); ++i) {
            const auto s = grid.stretch(cells[i]);
            CHECK(s.grid_compatible());
            CHECK(s.s0() == cells[i].a);
            CHECK(s.s1() == cells[i].b);
            for (std::size_t j = i + 1; j < cells.size(); ++j) CHECK(cells_disjoint(cells[i], cells[j]));
        }
        const auto config = sample_configuration(measure, 0.0, 2.0, 1e-2, 11);
        std::set<std::pair<long long, double>> seen;
        for (const auto& e : config.events) {
            const auto c = grid.cell_of(e.tau, e.u, e.aux);
            REQUIRE(c);
            CHECK(c->contains(e.tau, e.u, e.aux));
            CHECK(grid.mark_set(*c)(e.u, e.aux));
        }
        CHECK_FALSE(grid.cell_of(2.0, Vector::Constant(1, 0.5), 0.5));
    }
}

TEST_CASE("finite-difference derivative of an event time") {
    const auto h = TimeStretch::sine_bump(0.0, 1.0, 1.0);
    const auto config = single_event(0.3);
    const ConfigFunctional tau = [](const PointConfiguration& c) { return Vector::Constant(1, c.events[0].tau); };
    const auto fd = finite_diff_derivative(tau, config, h, all_marks());
    CHECK(fd.central.back()(0) == Approx(-h.Jh(0.3)).epsilon(1e-7));
    CHECK(fd.richardson(0) == Approx(-h.Jh(0.3)).epsilon(1e-7));
    CHECK(fd.slope == Approx(1.0).margin(0.05));
    std::vector<double> errs;
    for (const auto& f : fd.forward) errs.push_back(std::abs(f(0) + h.Jh(0.3)));
    CHECK(convergence_slope(fd.eps, errs) == Approx(1.0).margin(0.05));

    // Events outside gamma do not move.
    const auto none = finite_diff_derivative(tau, config, h, norm_band(2.0, 3.0));
    CHECK(none.central.back()(0) == 0.0);

    const ConfigFunctional rough = [](const PointConfiguration& c) {
        return Vector::Constant(1, std::sin(1e7 * c.events[0].tau));
    };
    CHECK_THROWS_AS(finite_diff_derivative(rough, config, h, all_marks()), NonConvergent);
}
