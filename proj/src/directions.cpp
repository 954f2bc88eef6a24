#include "levylab/directions.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <cmath>
#include <numbers>

namespace levylab {

namespace {

double radical_inverse(int base, std::uint64_t index) {
    double result = 0.0;
    double f = 1.0 / base;
    while (index > 0) {
        result += f * static_cast<double>(index % base);
        index /= base;
        f /= base;
    }
    return result;
}

constexpr int kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19};

}  // namespace

Vector halton_point(int dim, std::uint64_t index) {
    check_dim(dim);
    Vector out(dim);
    for (int i = 0; i < dim; ++i) out(i) = radical_inverse(kPrimes[i], index);
    return out;
}

std::vector<Vector> direction_grid(int dim, int count, bool half_sphere) {
    check_dim(dim);
    std::vector<Vector> out;
    if (dim == 1) {
        out.push_back(Vector::Constant(1, 1.0));
        if (!half_sphere) out.push_back(Vector::Constant(1, -1.0));
        return out;
    }
    if (count < 2) throw InvalidArgument("direction grid needs at least 2 directions");
    out.reserve(count);
    if (dim == 2) {
        const double span = half_sphere ? std::numbers::pi : 2.0 * std::numbers::pi;
        for (int k = 0; k < count; ++k) {
            const double theta = span * k / count;
            Vector v(2);
            v << std::cos(theta), std::sin(theta);
            out.push_back(v);
        }
        return out;
    }
    if (dim == 3) {
        const double golden = (1.0 + std::sqrt(5.0)) / 2.0;
        for (int k = 0; k < count; ++k) {
            const double z = half_sphere ? 1.0 - (k + 0.5) / count : 1.0 - 2.0 * (k + 0.5) / count;
            const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
            const double phi = 2.0 * std::numbers::pi * std::fmod(k / golden, 1.0);
            Vector v(3);
            v << r * std::cos(phi), r * std::sin(phi), z;
            out.push_back(v);
        }
        return out;
    }
    for (int k = 0; k < count; ++k) {
        Vector v(dim);
        for (int i = 0; i < dim; ++i) {
            const double u = radical_inverse(kPrimes[i], static_cast<std::uint64_t>(k) + 1);
            v(i) = std::sqrt(2.0) * boost::math::erf_inv(2.0 * u - 1.0);
        }
        v.normalize();
        if (half_sphere && v(0) < 0.0) v = -v;
        out.push_back(v);
    }
    return out;
}

void check_aperture(double aperture) {
    if (!(aperture > 0.0 && aperture < 1.0))
        throw InvalidAperture("aperture " + std::to_string(aperture) + " outside (0, 1)");
}

Cone::Cone(Vector axis_in, double aperture_in) : axis(std::move(axis_in)), aperture(aperture_in) {
    check_aperture(aperture);
    if (std::abs(axis.norm() - 1.0) > 1e-12)
        throw InvalidArgument("cone axis must be a unit vector");
}

}  // namespace levylab
