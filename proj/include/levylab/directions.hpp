#pragma once

#include "levylab/types.hpp"

#include <cstdint>
#include <vector>

namespace levylab {

/// Deterministic direction lattice on the unit sphere S_m.
///
/// m = 1: exactly {-1, +1}. m = 2: `count` equally spaced angles. m = 3:
/// spherical Fibonacci lattice. m >= 4: normalized Halton points pushed
/// through the inverse normal CDF. With `half_sphere`, one representative of
/// each antipodal pair is kept (for integrands that only see |(u, v)|).
std::vector<Vector> direction_grid(int dim, int count = 256, bool half_sphere = false);

/// Halton point in [0, 1)^dim (bases 2, 3, 5, ...) for index >= 1.
Vector halton_point(int dim, std::uint64_t index);

/// Two-sided cone V(v, aperture) = {y : |(y, v)| >= aperture * |y|}.
struct Cone {
    Vector axis;
    double aperture = 0.5;

    Cone(Vector axis, double aperture);

    bool contains(const Vector& y) const {
        return std::abs(y.dot(axis)) >= aperture * y.norm();
    }
};

void check_aperture(double aperture);

}  // namespace levylab
