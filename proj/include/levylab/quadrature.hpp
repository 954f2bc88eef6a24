#pragma once

#include <functional>
#include <vector>

namespace levylab {

struct QuadratureResult {
    double value = 0.0;
    double error = 0.0;
    bool diverged = false;
};

/// Integrates exp(log_integrand(s)) over [lo, hi] where either end may be
/// infinite. Finite pieces use adaptive Gauss-Kronrod 7/15; infinite ends are
/// marched outward in fixed-width chunks and closed with a geometric tail
/// (exact for regularly varying integrands in log-radius coordinates).
///
/// A tail whose chunk masses stop decreasing is reported as diverged with
/// value = +inf. Throws NonConvergentQuadrature when a finite piece misses
/// `rel_tol` by more than two orders of magnitude.
QuadratureResult integrate_exp_log(const std::function<double(double)>& log_integrand, double lo,
                                   double hi, double rel_tol = 1e-10);

/// Adaptive Gauss-Kronrod on a finite interval for an ordinary integrand.
QuadratureResult integrate_finite(const std::function<double(double)>& integrand, double lo,
                                  double hi, double rel_tol = 1e-10);

struct GaussLegendreRule {
    std::vector<double> nodes;    // on [-1, 1], ascending
    std::vector<double> weights;
};

/// n-point Gauss-Legendre rule; cached per n.
const GaussLegendreRule& gauss_legendre(int n);

}  // namespace levylab
