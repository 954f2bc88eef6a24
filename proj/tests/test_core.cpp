#include "levylab/directions.hpp"
#include "levylab/quadrature.hpp"
#include "levylab/rng.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

using namespace levylab;
using Catch::Approx;

TEST_CASE("philox known answers") {
    using A = std::array<std::uint32_t, 4>;
    CHECK(Philox4x32::block({0, 0, 0, 0}, {0, 0}) == A{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
    CHECK(Philox4x32::block({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
          A{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
    CHECK(Philox4x32::block({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
          A{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("philox streams are reproducible and distinct") {
    Philox4x32 a(42, 7), b(42, 7), c(42, 8);
    for (int i = 0; i < 100; ++i) {
        const auto x = a();
        CHECK(x == b());
        CHECK(x != c());
    }
    Philox4x32 g(1, 0);
    double sum = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double u = uniform_open01(g);
        REQUIRE(u > 0.0);
        REQUIRE(u < 1.0);
        sum += u;
    }
    CHECK(std::abs(sum / n - 0.5) < 4.0 * std::sqrt(1.0 / 12.0 / n));
}

TEST_CASE("seed derivation") {
    CHECK(fnv1a64("") == 0xCBF29CE484222325ull);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
    CHECK(derive_seed(1, "x") != derive_seed(1, "y"));
    CHECK(derive_seed(1, "x") == splitmix64(1 ^ fnv1a64("x")));
}

TEST_CASE("log-space quadrature") {
    const auto gauss = integrate_exp_log([](double s) { return -s * s; }, -INFINITY, INFINITY);
    CHECK(gauss.value == Approx(std::sqrt(std::numbers::pi)).epsilon(1e-10));
    CHECK_FALSE(gauss.diverged);

    const auto left = integrate_exp_log([](double s) { return s; }, -INFINITY, 0.0);
    CHECK(left.value == Approx(1.0).epsilon(1e-9));

    const auto right = integrate_exp_log([](double s) { return -0.5 * s; }, 0.0, INFINITY);
    CHECK(right.value == Approx(2.0).epsilon(1e-9));

    CHECK(integrate_exp_log([](double) { return 0.0; }, 0.0, INFINITY).diverged);
    CHECK(integrate_exp_log([](double s) { return 0.01 * s; }, 0.0, INFINITY).diverged);

    const auto finite = integrate_exp_log([](double s) { return 2.0 * s; }, -30.0, 1.0);
    CHECK(finite.value == Approx((std::exp(2.0) - std::exp(-60.0)) / 2.0).epsilon(1e-12));
}

TEST_CASE("gauss-legendre rule integrates polynomials exactly") {
    const auto& rule = gauss_legendre(64);
    REQUIRE(rule.nodes.size() == 64);
    double w = 0.0, x10 = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        w += rule.weights[i];
        x10 += rule.weights[i] * std::pow(rule.nodes[i], 10);
    }
    CHECK(w == Approx(2.0).epsilon(1e-14));
    CHECK(x10 == Approx(2.0 / 11.0).epsilon(1e-13));
    CHECK(&gauss_legendre(64) == &rule);
}

TEST_CASE("direction lattices") {
    const auto d1 = direction_grid(1);
    REQUIRE(d1.size() == 2);
    CHECK(d1[0](0) == 1.0);
    CHECK(d1[1](0) == -1.0);
    for (int dim : {2, 3, 4, 6}) {
        const auto grid = direction_grid(dim, 128);
        REQUIRE(grid.size() == 128);
        Vector mean = Vector::Zero(dim);
        for (const auto& v : grid) {
            CHECK(std::abs(v.norm() - 1.0) < 1e-12);
            mean += v / 128.0;
        }
        CHECK(mean.norm() < 0.15);
    }
    CHECK_THROWS_AS(Cone(Vector::Constant(1, 1.0), 1.0), InvalidAperture);
    CHECK_THROWS_AS(Cone(Vector::Constant(1, 1.0), 0.0), InvalidAperture);
    CHECK_THROWS_AS(Cone(Vector::Constant(1, 0.5), 0.5), InvalidArgument);
    Vector axis(2);
    axis << 1.0, 0.0;
    const Cone cone(axis, 0.5);
    Vector y(2);
    y << -1.0, 1.0;
    CHECK(cone.contains(y));
    y << 1.0, 2.0;
    CHECK_FALSE(cone.contains(y));
}
