#pragma once

// Test-only oracles, independent of the library implementation paths they
// check: dense/uniformized matrix exponentials, an adaptive Dormand-Prince
// integrator, chi-square tail machinery, and small closed forms.

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

namespace oracles {

/// Uniformized exp(t G) row for a birth-death chain on {0..m-1} with
/// constant edge rate between neighbors (reflecting ends): returns the law
/// at time t started from `from`.
inline std::vector<double> path_walk_law(int m, double edge_rate, double t, int from, double tail_tol = 1e-14) {
    const double lam = 2.0 * edge_rate * 1.01;
    std::vector<double> w(static_cast<std::size_t>(m), 0.0), buf(w.size()), acc(w.size(), 0.0);
    w[static_cast<std::size_t>(from)] = 1.0;
    const double a = lam * t;
    double log_pk = -a, cum = 0.0;
    for (int k = 0;; ++k) {
        if (k > 0) {
            for (int i = 0; i < m; ++i) {
                double stay = lam;
                if (i > 0) stay -= edge_rate;
                if (i < m - 1) stay -= edge_rate;
                double v = w[static_cast<std::size_t>(i)] * stay;
                if (i > 0) v += w[static_cast<std::size_t>(i) - 1] * edge_rate;
                if (i < m - 1) v += w[static_cast<std::size_t>(i) + 1] * edge_rate;
                buf[static_cast<std::size_t>(i)] = v / lam;
            }
            w.swap(buf);
            log_pk += std::log(a / k);
        }
        const double pk = std::exp(log_pk);
        if (pk > 0.0) {
            for (std::size_t i = 0; i < w.size(); ++i) acc[i] += pk * w[i];
            cum += pk;
        }
        if (1.0 - cum < tail_tol && k > a) break;
        if (k > 3000000) throw std::runtime_error("path_walk_law did not converge");
    }
    for (std::size_t i = 0; i < w.size(); ++i) acc[i] += (1.0 - cum) * w[i];
    return acc;
}

/// Dense exp(A) by scaling and squaring with a Taylor series; adequate for
/// the small (<= few hundred states) oracle matrices used in tests.
inline std::vector<double> dense_expm(std::vector<double> a, int m) {
    double norm = 0.0;
    for (int i = 0; i < m; ++i) {
        double row = 0.0;
        for (int j = 0; j < m; ++j) row += std::abs(a[static_cast<std::size_t>(i) * m + j]);
        norm = std::max(norm, row);
    }
    int squarings = 0;
    while (norm > 0.5) {
        norm *= 0.5;
        ++squarings;
    }
    const double scale = std::ldexp(1.0, -squarings);
    for (auto& v : a) v *= scale;

    auto matmul = [m](const std::vector<double>& x, const std::vector<double>& y) {
        std::vector<double> z(static_cast<std::size_t>(m) * m, 0.0);
        for (int i = 0; i < m; ++i)
            for (int k = 0; k < m; ++k) {
                const double xik = x[static_cast<std::size_t>(i) * m + k];
                if (xik == 0.0) continue;
                for (int j = 0; j < m; ++j) z[static_cast<std::size_t>(i) * m + j] += xik * y[static_cast<std::size_t>(k) * m + j];
            }
        return z;
    };

    std::vector<double> result(static_cast<std::size_t>(m) * m, 0.0), term = a;
    for (int i = 0; i < m; ++i) result[static_cast<std::size_t>(i) * m + i] = 1.0;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) result[static_cast<std::size_t>(i) * m + j] += a[static_cast<std::size_t>(i) * m + j];
    for (int k = 2; k <= 30; ++k) {
        term = matmul(term, a);
        double mx = 0.0;
        for (int i = 0; i < m * m; ++i) {
            term[static_cast<std::size_t>(i)] /= k;
            result[static_cast<std::size_t>(i)] += term[static_cast<std::size_t>(i)];
            mx = std::max(mx, std::abs(term[static_cast<std::size_t>(i)]));
        }
        if (mx < 1e-19) break;
    }
    for (int s = 0; s < squarings; ++s) result = matmul(result, result);
    return result;
}

/// Adaptive Dormand-Prince RK45; atol/rtol ~1e-12 for reference solutions.
inline std::vector<double> rk45(const std::function<void(double, const std::vector<double>&, std::vector<double>&)>& rhs,
                                std::vector<double> y, double t0, double t1, double tol = 1e-12) {
    static const double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static const double a21 = 1.0 / 5;
    static const double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static const double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static const double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static const double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                        a65 = -5103.0 / 18656;
    static const double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static const double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                        e6 = 22.0 / 525, e7 = -1.0 / 40;

    const std::size_t n = y.size();
    std::vector<double> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), tmp(n), ynew(n);
    double t = t0, h = (t1 - t0) / 100.0;
    int steps = 0;
    while (t < t1 - 1e-15) {
        if (t + h > t1) h = t1 - t;
        rhs(t, y, k1);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * a21 * k1[i];
        rhs(t + c2 * h, tmp, k2);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
        rhs(t + c3 * h, tmp, k3);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
        rhs(t + c4 * h, tmp, k4);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
        rhs(t + c5 * h, tmp, k5);
        for (std::size_t i = 0; i < n; ++i)
            tmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
        rhs(t + h, tmp, k6);
        for (std::size_t i = 0; i < n; ++i)
            ynew[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
        rhs(t + h, ynew, k7);
        double err = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double e = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
            const double sc = tol + tol * std::max(std::abs(y[i]), std::abs(ynew[i]));
            err = std::max(err, std::abs(e) / sc);
        }
        if (err <= 1.0) {
            t += h;
            y = ynew;
        }
        h *= std::min(5.0, std::max(0.2, 0.9 * std::pow(err > 0 ? err : 1e-10, -0.2)));
        if (++steps > 50000000) throw std::runtime_error("rk45 step limit");
    }
    return y;
}

/// Regularized lower incomplete gamma P(a, x).
inline double gammp(double a, double x) {
    if (x < 0.0 || a <= 0.0) throw std::invalid_argument("gammp domain");
    if (x == 0.0) return 0.0;
    if (x < a + 1.0) {
        double ap = a, sum = 1.0 / a, del = sum;
        for (int n = 0; n < 10000; ++n) {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if (std::abs(del) < std::abs(sum) * 1e-16) break;
        }
        return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
    }
    double b = x + 1.0 - a, c = 1e300, d = 1.0 / b, h = d;
    for (int i = 1; i < 10000; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < 1e-300) d = 1e-300;
        c = b + an / c;
        if (std::abs(c) < 1e-300) c = 1e-300;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-16) break;
    }
    return 1.0 - std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

inline double chi2_cdf(double x, double df) { return gammp(0.5 * df, 0.5 * x); }

inline double chi2_quantile(double p, double df) {
    double lo = 0.0, hi = 10.0 * df + 100.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (chi2_cdf(mid, df) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace oracles
