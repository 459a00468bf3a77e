#pragma once

// Gauss-Legendre panels and a bisection-adaptive rule, used by the kernel
// and macro modules for all smooth quadrature.

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

namespace sepr {

struct GaussRule {
    std::vector<double> nodes;   // on [-1, 1]
    std::vector<double> weights;
};

/// Nodes/weights by Newton iteration on the Legendre polynomial.
inline const GaussRule& gauss_rule(int n) {
    static thread_local std::vector<GaussRule> cache(65);
    if (n < 1 || n > 64) throw std::invalid_argument("gauss rule order out of range");
    GaussRule& r = cache[static_cast<std::size_t>(n)];
    if (!r.nodes.empty()) return r;
    r.nodes.resize(static_cast<std::size_t>(n));
    r.weights.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            double dp = n * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
            double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        double dp = n * (x * p1 - p0) / (x * x - 1.0);
        r.nodes[static_cast<std::size_t>(i)] = x;
        r.weights[static_cast<std::size_t>(i)] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    return r;
}

template <class F>
double integrate_gl(F&& f, double a, double b, int order) {
    const GaussRule& r = gauss_rule(order);
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    double s = 0.0;
    for (std::size_t i = 0; i < r.nodes.size(); ++i) s += r.weights[i] * f(mid + half * r.nodes[i]);
    return s * half;
}

namespace detail {
template <class F>
double integrate_adaptive_impl(F& f, double a, double b, double tol, int depth, double coarse) {
    const double mid = 0.5 * (a + b);
    const double left = integrate_gl(f, a, mid, 15);
    const double right = integrate_gl(f, mid, b, 15);
    const double fine = left + right;
    const double err = std::abs(fine - coarse);
    // per-panel tolerance (no halving: panels that pass a GL-15 comparison
    // are in practice far inside the bound), plus a roundoff floor
    if (depth <= 0 || err <= tol || err <= 4e-16 * (std::abs(left) + std::abs(right))) return fine;
    return detail::integrate_adaptive_impl(f, a, mid, tol, depth - 1, left) +
           detail::integrate_adaptive_impl(f, mid, b, tol, depth - 1, right);
}
} // namespace detail

/// Adaptive bisection with GL-15 panels; `tol` is a per-panel absolute
/// tolerance (the total error is in practice well below a few multiples).
template <class F>
double integrate_adaptive(F&& f, double a, double b, double tol = 1e-12, int max_depth = 40) {
    if (!(b > a)) return 0.0;
    return detail::integrate_adaptive_impl(f, a, b, tol, max_depth, integrate_gl(f, a, b, 15));
}

/// Adaptive integration split at interior breakpoints.
template <class F>
double integrate_adaptive_split(F&& f, double a, double b, const std::vector<double>& breaks, double tol = 1e-12) {
    std::vector<double> pts{a};
    for (double p : breaks)
        if (p > a && p < b) pts.push_back(p);
    pts.push_back(b);
    std::sort(pts.begin(), pts.end());
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) s += integrate_adaptive(f, pts[i], pts[i + 1], tol / static_cast<double>(pts.size()));
    return s;
}

} // namespace sepr
