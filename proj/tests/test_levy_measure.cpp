#include "levylab/levy_measure.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>

using namespace levylab;
using Catch::Approx;

namespace {

LevyMeasure stable(double alpha, int dim = 1) {
    return RadialDensity{dim, RadialProfile::power_law(1.0, alpha), AngularMeasure::uniform(dim, 2.0)};
}

Vector e1(int dim) { return unit_vector<double>(dim, 0); }

}  // namespace

TEST_CASE("truncated moments against direct summation") {
    CHECK(truncated_moment(LevyMeasure::zero(1), 2, 0.1) == 0.0);

    const LevyMeasure geo(AtomicSequence::geometric(std::exp(1.0)));
    const double eps = std::exp(-5.0);
    double oracle = 0.0;
    for (int n = 1; n <= 50; ++n) oracle += std::pow(std::min(std::exp(-n), eps), 2);
    CHECK(truncated_moment(geo, 2, eps) == Approx(oracle).epsilon(1e-12));
    CHECK(oracle == Approx(5 * eps * eps + std::exp(-12.0) / (1 - std::exp(-2.0))).epsilon(1e-12));

    const auto prof = order_index_profile(geo, 2, 0.5, {eps, 1e-3, 1e-4, 1e-5, 1e-6});
    CHECK(prof.values[0] == Approx(1.0 + std::exp(-2.0) / (5.0 * (1.0 - std::exp(-2.0)))).epsilon(1e-10));
}

TEST_CASE("stable closed forms") {
    const auto s1 = stable(1.0);
    CHECK(truncated_moment(s1, 2, 0.01) == Approx(0.04).epsilon(1e-8));
    const auto lower = lower_index_profile(s1, {0.01, 0.001, 1e-4, 1e-5, 1e-6});
    CHECK(lower.values[0] == Approx(0.04 / (1e-4 * std::log(100.0))).epsilon(1e-8));
    CHECK(lower.values[0] == Approx(86.86).epsilon(1e-4));
    const double alpha = 0.7;
    CHECK(truncated_moment(stable(alpha), 2, 1e-3) ==
          Approx(4 * std::pow(1e-3, 2 - alpha) / (alpha * (2 - alpha))).epsilon(1e-8));
}

TEST_CASE("atom moments equal the plain finite sum") {
    const LevyMeasure fw(AtomicSequence::factorial_weighted(30));
    for (double eps : {0.3, 1e-3, 1e-9}) {
        for (int r : {1, 2, 3}) {
            double direct = 0.0;
            double f = 1.0;
            for (int n = 1; n <= 30; ++n) {
                f /= n;
                direct += n * std::pow(std::min(f, eps), r);
            }
            CHECK(truncated_moment(fw, r, eps) == Approx(direct).epsilon(1e-12));
        }
    }
}

TEST_CASE("monotone in eps and in cone width") {
    const LevyMeasure par(AtomicSequence::parabola(40));
    const auto dirs = direction_grid(2, 16, true);
    for (const auto& v : dirs) {
        double prev = 0.0;
        for (double eps : {1e-8, 1e-6, 1e-3, 0.1, 0.9}) {
            const double m = truncated_moment(par, 2, eps, Cone(v, 0.3));
            CHECK(m >= prev);
            prev = m;
        }
        double wide = truncated_moment(par, 2, 1e-3, Cone(v, 0.1));
        double narrow = truncated_moment(par, 2, 1e-3, Cone(v, 0.6));
        CHECK(wide >= narrow);
    }
    const auto s2 = stable(1.2, 2);
    for (const auto& v : dirs)
        CHECK(truncated_moment(s2, 2, 1e-3, Cone(v, 0.2)) >= truncated_moment(s2, 2, 1e-3, Cone(v, 0.7)));
}

TEST_CASE("in one dimension the upper and lower profiles agree") {
    for (const auto& m : {LevyMeasure(AtomicSequence::geometric(3.0)), stable(0.8),
                          LevyMeasure(AtomicSequence::factorial_weighted())}) {
        const auto eps = default_eps_list(m, 12);
        const auto up = order_index_profile(m, 2, 0.5, eps);
        const auto lo = lower_index_profile(m, eps);
        for (std::size_t i = 0; i < eps.size(); ++i) CHECK(up.values[i] == Approx(lo.values[i]).epsilon(1e-12));
    }
}

TEST_CASE("index classification") {
    for (double lg : {1.0, 2.0}) {
        const LevyMeasure geo(AtomicSequence::geometric(std::exp(lg)));
        const auto c = classify_order_index(geo, 2, default_eps_list(geo));
        CHECK(c.kind == IndexClass::Kind::Finite);
        CHECK(c.value == Approx(1.0 / lg).epsilon(0.05));
        CHECK(c.aperture_stable);

        const LevyMeasure scaled(Mixture{{{3.0, geo}}});
        const auto cs = classify_order_index(scaled, 2, default_eps_list(scaled));
        CHECK(cs.kind == IndexClass::Kind::Finite);
        CHECK(std::abs(cs.value - 3.0 * c.value) <= cs.uncertainty + 1e-9);
    }
    const LevyMeasure fw(AtomicSequence::factorial_weighted());
    for (int r : {1, 2, 4})
        CHECK(classify_order_index(fw, r, default_eps_list(fw)).kind == IndexClass::Kind::Infinite);
    CHECK(classify_order_index(stable(1.0), 2, default_eps_list(stable(1.0))).kind ==
          IndexClass::Kind::Infinite);

    Atom a{Vector::Constant(1, 0.5), 2.0};
    const LevyMeasure finite(AtomicSequence::table({a}));
    CHECK(classify_lower_index(finite, default_eps_list(finite)).kind == IndexClass::Kind::Zero);

    IndexProfile tiny;
    tiny.eps = {0.1, 0.01};
    tiny.values = {1, 1};
    CHECK_THROWS_AS(classify_index(tiny), InsufficientProfile);
}

TEST_CASE("wide cone") {
    const LevyMeasure geo(AtomicSequence::geometric(std::exp(1.0)));
    CHECK(wide_cone_check(geo, 0.5).holds);

    const LevyMeasure par(AtomicSequence::parabola());
    const auto rep = wide_cone_check(par, 0.5);
    CHECK_FALSE(rep.holds);
    REQUIRE(rep.witness);
    // Enumerate atoms k <= 20 directly for the reported witness and for (0, 1).
    Vector up(2);
    up << 0.0, 1.0;
    for (const Vector& v : {*rep.witness, up}) {
        int inside = 0;
        double f = 1.0;
        for (int k = 1; k <= 20; ++k) {
            f /= k;
            Vector z(2);
            z << f, f * f;
            if (std::abs(z.dot(v)) >= 0.5 * z.norm()) ++inside;
        }
        CHECK(inside < 20);
        CHECK(inside <= 3);
    }

    CHECK(wide_cone_check(stable(1.0, 2), 0.5).holds);
    CHECK_FALSE(wide_cone_check(LevyMeasure::zero(2), 0.5).holds);
    CHECK_THROWS_AS(wide_cone_check(geo, 1.5), InvalidAperture);
}

TEST_CASE("divergence rule") {
    CHECK(diverges({4, 9, 13, 18}));
    CHECK(diverges({0, 1, 2, 3}));
    CHECK_FALSE(diverges({1, 1, 1, 1}));
    CHECK_FALSE(diverges({4, 3, 9, 18}));
    CHECK_FALSE(diverges({0, 0, 0, 5}));
    CHECK_FALSE(diverges({0, 0, 0, 0}));
}

TEST_CASE("moment checks") {
    const LevyMeasure geo(AtomicSequence::geometric(std::exp(1.0)));
    const auto g = moment_checks(geo, {1.0, 2.0});
    CHECK(g.first_moment_small_jumps);
    CHECK(g.first_moment_value == Approx(1.0 / (std::exp(1.0) - 1.0)).epsilon(1e-12));
    CHECK(g.big_jump_moments[0].second);
    CHECK(g.big_jump_moments[1].second);

    const auto s = moment_checks(stable(1.5), {1.0});
    CHECK_FALSE(s.first_moment_small_jumps);
    CHECK(s.big_jump_moments[0].second);
    CHECK_FALSE(moment_checks(stable(0.5), {0.4, 0.6}).big_jump_moments[1].second);
    CHECK(moment_checks(stable(0.5), {0.4}).big_jump_moments[0].second);
    CHECK(moment_checks(stable(0.5), {0.4}).first_moment_small_jumps);

    Atom a{unit_vector<double>(3, 0), 1.0};
    const auto d = moment_checks(LevyMeasure(AtomicSequence::table({a})), {2.0});
    CHECK(d.first_moment_small_jumps);
    CHECK(d.big_jump_moments[0].second);

    AtomicSequence harmonic;
    harmonic.label = "harmonic";
    harmonic.generator = [](int k) { return Atom{Vector::Constant(1, 1.0 / k), 1.0}; };
    CHECK_FALSE(moment_checks(LevyMeasure(harmonic), {}).first_moment_small_jumps);
}

TEST_CASE("measure invariants") {
    CHECK_THROWS_AS(LevyMeasure(AtomicSequence::table({Atom{Vector::Zero(1), 1.0}})), InvalidArgument);
    CHECK_THROWS_AS(LevyMeasure(AtomicSequence::table({Atom{Vector::Ones(1), 0.0}})), InvalidArgument);
    CHECK_THROWS_AS(LevyMeasure(Mixture{{{-1.0, LevyMeasure::zero(1)}}}), InvalidArgument);
    CHECK_THROWS_AS(stable(2.5), InvalidArgument);  // not integrable at the origin
    CHECK_THROWS_AS(LevyMeasure(AtomicSequence::factorial(200)), InvalidArgument);

    const LevyMeasure geo(AtomicSequence::geometric(std::exp(1.0), 20));
    CHECK(geo.tail_bound() == Approx(std::exp(-42.0) / (1 - std::exp(-2.0))).epsilon(1e-12));
    CHECK(geo.integrability_mass() == Approx(std::exp(-2.0) / (1 - std::exp(-2.0))).epsilon(1e-12));
    const LevyMeasure fw(AtomicSequence::factorial_weighted(10));
    double exact = 0.0, f = 1.0;
    for (int n = 1; n <= 40; ++n) {
        f /= n;
        if (n > 10) exact += n * f * f;
    }
    CHECK(fw.tail_bound() >= exact);
    CHECK(fw.tail_bound() <= 1.5 * exact);

    const auto s1 = stable(1.0);
    CHECK(s1.integrability_mass() == Approx(2.0 * (1.0 + 1.0)).epsilon(1e-9));
    CHECK(first_moment_vector(s1, 0.1, 1.0).norm() < 1e-12);
    CHECK(second_moment_matrix(s1, 0.1)(0, 0) == Approx(2.0 * 0.1).epsilon(1e-9));
    CHECK(mass_above(s1, 0.1) == Approx(20.0).epsilon(1e-9));
    CHECK(e1(2).norm() == 1.0);
}
