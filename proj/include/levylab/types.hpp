#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace levylab {

/// Largest state dimension supported. Vectors and matrices below keep their
/// storage inline (no heap traffic in the integrator hot loops).
inline constexpr int kMaxDim = 6;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;

using Vector = VectorX<double>;
using Matrix = MatrixX<double>;

/// Base of every error raised by the library. `code()` is a short stable tag
/// (e.g. "NonConvergentQuadrature") that reports and the CLI print verbatim.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& what)
        : std::runtime_error(code + ": " + what), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

#define LEVYLAB_DEFINE_ERROR(Name)                                              \
    class Name : public Error {                                                 \
    public:                                                                     \
        explicit Name(const std::string& what) : Error(#Name, what) {}          \
    }

LEVYLAB_DEFINE_ERROR(InvalidArgument);
LEVYLAB_DEFINE_ERROR(NonConvergentQuadrature);
LEVYLAB_DEFINE_ERROR(InvalidAperture);
LEVYLAB_DEFINE_ERROR(InsufficientProfile);
LEVYLAB_DEFINE_ERROR(RateOverflow);
LEVYLAB_DEFINE_ERROR(BlowUp);
LEVYLAB_DEFINE_ERROR(IllConditioned);
LEVYLAB_DEFINE_ERROR(InvalidParams);
LEVYLAB_DEFINE_ERROR(NonConvergent);
LEVYLAB_DEFINE_ERROR(TooFewSamples);
LEVYLAB_DEFINE_ERROR(LatticeMismatch);
LEVYLAB_DEFINE_ERROR(Inconclusive);
LEVYLAB_DEFINE_ERROR(ConfigError);
LEVYLAB_DEFINE_ERROR(IoError);
LEVYLAB_DEFINE_ERROR(ExperimentFailure);

#undef LEVYLAB_DEFINE_ERROR

template <typename Scalar>
VectorX<Scalar> unit_vector(int dim, int axis) {
    VectorX<Scalar> v = VectorX<Scalar>::Zero(dim);
    v(axis) = Scalar(1);
    return v;
}

inline void check_dim(int dim) {
    if (dim < 1 || dim > kMaxDim)
        throw InvalidArgument("dimension " + std::to_string(dim) + " outside [1, " +
                              std::to_string(kMaxDim) + "]");
}

}  // namespace levylab
