#pragma once

// Drift coefficients a : R^m -> R^m and the sampled certificates for the
// non-degeneracy classes K_r, the jump non-degeneracy trend and dissipativity.

#include "levylab/levy_measure.hpp"
#include "levylab/types.hpp"

#include <functional>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

namespace levylab {

enum class DriftKind { Linear, NegIdentity, Polynomial1D, Custom };

std::string to_string(DriftKind kind);

template <typename Scalar>
class BasicDriftField {
public:
    using VectorType = VectorX<Scalar>;
    using MatrixType = MatrixX<Scalar>;
    using Evaluator = std::function<VectorType(const VectorType&)>;
    using Gradient = std::function<MatrixType(const VectorType&)>;

    static BasicDriftField linear(const MatrixType& A) {
        check_dim(static_cast<int>(A.rows()));
        if (A.rows() != A.cols()) throw InvalidArgument("linear drift needs a square matrix");
        BasicDriftField f(static_cast<int>(A.rows()), DriftKind::Linear);
        f.matrix_ = A;
        f.eval_ = [A](const VectorType& x) -> VectorType { return A * x; };
        f.grad_ = [A](const VectorType&) -> MatrixType { return A; };
        f.lipschitz_ = static_cast<double>(spectral_norm(A));
        f.label_ = "linear";
        return f;
    }

    static BasicDriftField neg_identity(int dim) {
        BasicDriftField f = linear(-MatrixType::Identity(dim, dim));
        f.kind_ = DriftKind::NegIdentity;
        f.label_ = "neg-identity";
        return f;
    }

    static BasicDriftField zero(int dim) {
        BasicDriftField f = linear(MatrixType::Zero(dim, dim));
        f.label_ = "zero";
        return f;
    }

    /// a(x) = sum_k c_k x^k in one dimension.
    static BasicDriftField polynomial_1d(std::vector<Scalar> coefficients) {
        if (coefficients.empty()) coefficients.push_back(Scalar(0));
        BasicDriftField f(1, DriftKind::Polynomial1D);
        f.coefficients_ = coefficients;
        f.eval_ = [coefficients](const VectorType& x) -> VectorType {
            Scalar acc(0);
            for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it) acc = acc * x(0) + *it;
            return VectorType::Constant(1, acc);
        };
        f.grad_ = [coefficients](const VectorType& x) -> MatrixType {
            Scalar acc(0);
            for (std::size_t k = coefficients.size(); k-- > 1;) acc = acc * x(0) + Scalar(k) * coefficients[k];
            return MatrixType::Constant(1, 1, acc);
        };
        if (coefficients.size() == 1) f.lipschitz_ = 0.0;
        if (coefficients.size() == 2) f.lipschitz_ = std::abs(static_cast<double>(coefficients[1]));
        f.label_ = "polynomial";
        return f;
    }

    /// Without a gradient, central differences with step 1e-6 are used.
    static BasicDriftField custom(int dim, Evaluator eval, Gradient grad = {},
                                  std::optional<double> lipschitz = std::nullopt) {
        check_dim(dim);
        BasicDriftField f(dim, DriftKind::Custom);
        f.eval_ = std::move(eval);
        if (grad) {
            f.grad_ = std::move(grad);
        } else {
            f.grad_ = [dim, e = f.eval_](const VectorType& x) -> MatrixType {
                const Scalar h(1e-6);
                MatrixType J(dim, dim);
                for (int j = 0; j < dim; ++j) {
                    VectorType xp = x, xm = x;
                    xp(j) += h;
                    xm(j) -= h;
                    J.col(j) = (e(xp) - e(xm)) / (Scalar(2) * h);
                }
                return J;
            };
        }
        f.lipschitz_ = lipschitz;
        f.label_ = "custom";
        return f;
    }

    int dim() const { return dim_; }
    DriftKind kind() const { return kind_; }
    const std::string& label() const { return label_; }
    void set_label(std::string label) { label_ = std::move(label); }
    std::optional<double> lipschitz_bound() const { return lipschitz_; }
    bool is_linear() const { return kind_ == DriftKind::Linear || kind_ == DriftKind::NegIdentity; }
    const MatrixType& matrix() const { return matrix_; }
    const std::vector<Scalar>& coefficients() const { return coefficients_; }

    VectorType operator()(const VectorType& x) const { return eval_(x); }
    MatrixType gradient(const VectorType& x) const { return grad_(x); }

    /// Delta(x, u) = a(x + u) - a(x); exact for linear fields.
    VectorType delta(const VectorType& x, const VectorType& u) const {
        if (is_linear()) return matrix_ * u;
        return eval_(x + u) - eval_(x);
    }

private:
    BasicDriftField(int dim, DriftKind kind) : dim_(dim), kind_(kind) {}

    static Scalar spectral_norm(const MatrixType& A) {
        if (A.size() == 0) return Scalar(0);
        Eigen::JacobiSVD<MatrixType> svd(A);
        return svd.singularValues()(0);
    }

    int dim_ = 1;
    DriftKind kind_ = DriftKind::Custom;
    std::string label_;
    Evaluator eval_;
    Gradient grad_;
    MatrixType matrix_;
    std::vector<Scalar> coefficients_;
    std::optional<double> lipschitz_;
};

using DriftField = BasicDriftField<double>;

template <typename Scalar>
VectorX<Scalar> delta(const BasicDriftField<Scalar>& a, const std::type_identity_t<VectorX<Scalar>>& x,
                      const std::type_identity_t<VectorX<Scalar>>& u) {
    return a.delta(x, u);
}

/// Largest relative error between the gradient evaluator and central
/// differences of the field at `count` quasi-random points of [-2, 2]^m.
double gradient_consistency(const DriftField& a, int count = 100);

/// Smallest K with |a(x)|^2 <= K (1 + |x|^2) on the sampled box [-half, half]^m.
double linear_growth_constant(const DriftField& a, double half_width = 2.0, int count = 256);

/// Quasi-random points of [-half, half]^m; the first one is the box center.
std::vector<Vector> sample_box(int dim, double half_width, int count);

struct KrWitness {
    int x_index = 0;
    Vector v;
    Vector w;
    double ratio = 0.0;  // min over test y of |(Delta(x,y), v)| / |(y, w)|^r
};

struct KrCertificate {
    int r = 1;
    double aperture = 0.5;
    std::vector<Vector> xs;
    std::vector<KrWitness> witnesses;
    double D = 0.0;
    bool pass = false;
    std::vector<std::string> warnings;
};

struct KrOptions {
    double half_width = 2.0;
    int n_x = 64;
    int n_v = 64;
    int w_directions = 256;
    double d_search = 1.0;
    int n_radii = 8;
    int n_rays = 16;
};

/// Sampled check of the K_r inequality: for every sampled (x, v) search the
/// witness w on the direction lattice that maximizes the worst ratio over
/// test points y inside V(w, aperture). Passing is necessary evidence, not proof.
KrCertificate k_r_certificate(const DriftField& a, int r, double aperture, const KrOptions& options = {});

struct TrendDirection {
    Vector v;
    std::vector<double> masses;
    bool divergent = false;
};

struct NondegeneracyTrend {
    std::vector<double> n_list;
    double tol = 1e-10;
    std::vector<TrendDirection> directions;
    bool divergent = false;
};

/// Pi(u : |u| >= 1/n, |(Delta(x,u), v)| > tol) for each n and each v in `v_grid`.
NondegeneracyTrend nondegeneracy_trend(const DriftField& a, const LevyMeasure& measure, const Vector& x,
                                       const std::vector<Vector>& v_grid,
                                       std::vector<double> n_list = {1e2, 1e4, 1e6, 1e8},
                                       double tol = 1e-10);

struct Dissipativity {
    bool holds = false;
    double gamma_estimate = 0.0;
};

/// min of -(a(x), x)/|x|^2 over |x| in [R, 4R] (radius R included).
Dissipativity dissipativity_check(const DriftField& a, double R, int count = 512);

}  // namespace levylab
