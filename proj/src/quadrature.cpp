#include "levylab/quadrature.hpp"

#include "levylab/types.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/legendre.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>

namespace levylab {

namespace {

constexpr double kChunk = 4.0;
constexpr int kMaxChunks = 400;

QuadratureResult gk_piece(const std::function<double(double)>& f, double a, double b,
                          double rel_tol) {
    if (!(b > a)) return {};
    double err = 0.0;
    const double value = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
        f, a, b, 18, rel_tol, &err);
    if (!std::isfinite(value))
        throw NonConvergentQuadrature("non-finite integral on [" + std::to_string(a) + ", " +
                                      std::to_string(b) + "]");
    const double scale = std::max(std::abs(value), std::numeric_limits<double>::min());
    if (err > 100.0 * rel_tol * scale && err > 1e-280)
        throw NonConvergentQuadrature("error estimate " + std::to_string(err) +
                                      " exceeds tolerance on [" + std::to_string(a) + ", " +
                                      std::to_string(b) + "]");
    return {value, err, false};
}

// Marches from `anchor` in direction `dir` (+1 or -1) until the chunk masses
// decay geometrically below tolerance.
QuadratureResult march_tail(const std::function<double(double)>& f, double anchor, int dir,
                            double running_total, double rel_tol) {
    QuadratureResult out;
    double previous = -1.0;
    int small_streak = 0;
    int growth_streak = 0;
    const auto diverged = [&out] {
        out.value = std::numeric_limits<double>::infinity();
        out.diverged = true;
        return out;
    };
    for (int k = 0; k < kMaxChunks; ++k) {
        const double a = anchor + dir * k * kChunk;
        const double b = anchor + dir * (k + 1) * kChunk;
        QuadratureResult piece;
        try {
            piece = gk_piece(f, std::min(a, b), std::max(a, b), rel_tol);
        } catch (const NonConvergentQuadrature&) {
            if (growth_streak > 0) return diverged();
            throw;
        }
        if (previous > 0.0 && piece.value >= previous) {
            if (++growth_streak >= 25) return diverged();
        } else {
            growth_streak = 0;
        }
        out.value += piece.value;
        out.error += piece.error;
        const double total = running_total + out.value;
        if (piece.value == 0.0 && previous == 0.0) return out;
        if (previous > 0.0 && piece.value < previous && piece.value <= rel_tol * total) {
            if (++small_streak >= 2) {
                const double q = piece.value / previous;
                const double tail = piece.value * q / (1.0 - q);
                out.value += tail;
                out.error += tail;
                return out;
            }
        } else {
            small_streak = 0;
        }
        previous = piece.value;
    }
    return diverged();
}

}  // namespace

QuadratureResult integrate_finite(const std::function<double(double)>& integrand, double lo,
                                  double hi, double rel_tol) {
    return gk_piece(integrand, lo, hi, rel_tol);
}

QuadratureResult integrate_exp_log(const std::function<double(double)>& log_integrand, double lo,
                                   double hi, double rel_tol) {
    if (!(hi > lo)) return {};
    const auto f = [&](double s) {
        const double l = log_integrand(s);
        return l == -std::numeric_limits<double>::infinity() ? 0.0 : std::exp(l);
    };
    const bool lo_inf = std::isinf(lo);
    const bool hi_inf = std::isinf(hi);
    QuadratureResult out;
    if (!lo_inf && !hi_inf) {
        // Long finite ranges are chunked so each GK call sees a smooth piece.
        const int pieces = std::max(1, static_cast<int>(std::ceil((hi - lo) / kChunk)));
        const double width = (hi - lo) / pieces;
        for (int k = 0; k < pieces; ++k) {
            const auto p = gk_piece(f, lo + k * width, k + 1 == pieces ? hi : lo + (k + 1) * width,
                                    rel_tol);
            out.value += p.value;
            out.error += p.error;
        }
        return out;
    }
    if (lo_inf && hi_inf) {
        const auto right = march_tail(f, 0.0, +1, 0.0, rel_tol);
        const auto left = march_tail(f, 0.0, -1, right.value, rel_tol);
        out.value = left.value + right.value;
        out.error = left.error + right.error;
        out.diverged = left.diverged || right.diverged;
        return out;
    }
    if (lo_inf) return march_tail(f, hi, -1, 0.0, rel_tol);
    return march_tail(f, lo, +1, 0.0, rel_tol);
}

const GaussLegendreRule& gauss_legendre(int n) {
    static std::mutex mutex;
    static std::map<int, GaussLegendreRule> cache;
    std::lock_guard lock(mutex);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    if (n < 1) throw InvalidArgument("Gauss-Legendre order must be positive");

    GaussLegendreRule rule;
    const auto positive = boost::math::legendre_p_zeros<double>(n);
    std::vector<std::pair<double, double>> pairs;
    for (double x : positive) {
        const double dp = boost::math::legendre_p_prime<double>(n, x);
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        pairs.emplace_back(x, w);
        if (x != 0.0) pairs.emplace_back(-x, w);
    }
    std::sort(pairs.begin(), pairs.end());
    for (const auto& [x, w] : pairs) {
        rule.nodes.push_back(x);
        rule.weights.push_back(w);
    }
    return cache.emplace(n, std::move(rule)).first->second;
}

}  // namespace levylab
