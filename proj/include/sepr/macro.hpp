#pragma once

// The macroscopic limit.  The boundary traces u+-(t) solve the coupled
// weakly singular Volterra system obtained by evaluating the limit integral
// equation at r = +-1:
//   u+(t) = w_{+,t} + int_0^t { p(s) f+(u+(t-s)) - q(s) f-(u-(t-s)) } ds
//   u-(t) = w_{-,t} + int_0^t { q(s) f+(u+(t-s)) - p(s) f-(u-(t-s)) } ds
// with f+(u) = (j/2)(1-u^K), f-(u) = (j/2)(1-(1-u)^K).  p(s) ~ sqrt(2/(pi s))
// near s = 0, so every panel is integrated in the tau = sqrt(s) variable
// (product integration with exact panel moments against piecewise-linear
// interpolants of f+-).  The density is then reconstructed from the traces,
// and the Dirichlet form, the nonlinear boundary flux relation, and the
// stationary profile provide independent checks.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "kernels.hpp"
#include "quad.hpp"

namespace sepr {

struct BoundaryTraces {
    double reservoir_rate = 0.0; // j
    int reservoir_width = 0;     // K
    double step = 0.0;           // h_t
    std::vector<double> times;
    std::vector<double> u_plus;
    std::vector<double> u_minus;

    std::size_t index_of_time(double t, double tol = 1e-9) const {
        const double idx = t / step;
        const auto i = static_cast<std::size_t>(std::llround(idx));
        if (i >= times.size() || std::abs(times[i] - t) > tol)
            throw std::invalid_argument("time not on the trace grid");
        return i;
    }
};

namespace macro_detail {

inline double f_plus(double u, double j, int k) { return 0.5 * j * (1.0 - std::pow(u, k)); }
inline double f_minus(double u, double j, int k) { return 0.5 * j * (1.0 - std::pow(1.0 - u, k)); }

/// Panel moments int f(s) ds and int f(s) (s - s_lo)/h ds on [s_lo, s_hi],
/// integrated in tau = sqrt(s) (the kernels are smooth in tau).
template <class F>
inline void panel_moments(F&& kernel, double s_lo, double s_hi, double& m0, double& m1) {
    const GaussRule& rule = gauss_rule(24);
    const double a = std::sqrt(s_lo), b = std::sqrt(s_hi), h = s_hi - s_lo;
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    m0 = 0.0;
    m1 = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        const double tau = mid + half * rule.nodes[i];
        const double s = tau * tau;
        const double v = kernel(s) * 2.0 * tau * half * rule.weights[i];
        m0 += v;
        m1 += v * (s - s_lo) / h;
    }
}

} // namespace macro_detail

/// Time-marching product-integration solver for the trace system.
inline BoundaryTraces solve_boundary_traces(const MacroProfile& u0, double j, int k_width, double t_final,
                                            double h) {
    if (k_width < 1) throw std::invalid_argument("need K >= 1");
    if (j < 0.0) throw std::invalid_argument("need j >= 0");
    if (h <= 0.0 || t_final / h > 1e6) throw std::invalid_argument("trace grid must resolve T with at most 1e6 steps");

    const int n = static_cast<int>(std::llround(t_final / h));
    if (std::abs(n * h - t_final) > 1e-9 * std::max(1.0, t_final)) throw std::invalid_argument("t_final must be a multiple of h");

    BoundaryTraces tr;
    tr.reservoir_rate = j;
    tr.reservoir_width = k_width;
    tr.step = h;
    tr.times.resize(static_cast<std::size_t>(n) + 1);
    for (int i = 0; i <= n; ++i) tr.times[static_cast<std::size_t>(i)] = i * h;

    // free boundary traces; exactly the constant for constant data
    const bool constant_data = u0.is_constant;
    std::vector<double> w_plus(tr.times.size()), w_minus(tr.times.size());
    w_plus[0] = u0(1.0);
    w_minus[0] = u0(-1.0);
    for (int i = 1; i <= n; ++i) {
        if (constant_data) {
            w_plus[static_cast<std::size_t>(i)] = u0(0.0);
            w_minus[static_cast<std::size_t>(i)] = u0(0.0);
        } else {
            w_plus[static_cast<std::size_t>(i)] = free_boundary_trace(i * h, u0, true);
            w_minus[static_cast<std::size_t>(i)] = free_boundary_trace(i * h, u0, false);
        }
    }

    tr.u_plus.assign(tr.times.size(), 0.0);
    tr.u_minus.assign(tr.times.size(), 0.0);
    tr.u_plus[0] = w_plus[0];
    tr.u_minus[0] = w_minus[0];
    if (j == 0.0) {
        tr.u_plus = w_plus;
        tr.u_minus = w_minus;
        tr.u_plus[0] = u0(1.0);
        tr.u_minus[0] = u0(-1.0);
        return tr;
    }

    // kernel panel moments, shared by every step
    std::vector<double> ap(static_cast<std::size_t>(n)), bp(static_cast<std::size_t>(n));
    std::vector<double> aq(static_cast<std::size_t>(n)), bq(static_cast<std::size_t>(n));
    for (int m = 0; m < n; ++m) {
        macro_detail::panel_moments([](double s) { return boundary_kernels(s).same; }, m * h, (m + 1) * h,
                                    ap[static_cast<std::size_t>(m)], bp[static_cast<std::size_t>(m)]);
        macro_detail::panel_moments([](double s) { return boundary_kernels(s).cross; }, m * h, (m + 1) * h,
                                    aq[static_cast<std::size_t>(m)], bq[static_cast<std::size_t>(m)]);
    }

    std::vector<double> fp(tr.times.size()), fm(tr.times.size());
    fp[0] = macro_detail::f_plus(tr.u_plus[0], j, k_width);
    fm[0] = macro_detail::f_minus(tr.u_minus[0], j, k_width);

    const double cp0 = ap[0] - bp[0], cq0 = aq[0] - bq[0];
    for (int i = 1; i <= n; ++i) {
        // history: panels m = 1..i-1 fully known, panel 0 contributes the
        // known endpoint at t_{i-1} plus the unknown at t_i
        double hist_p_fp = fp[static_cast<std::size_t>(i - 1)] * bp[0];
        double hist_p_fm = fm[static_cast<std::size_t>(i - 1)] * bp[0];
        double hist_q_fp = fp[static_cast<std::size_t>(i - 1)] * bq[0];
        double hist_q_fm = fm[static_cast<std::size_t>(i - 1)] * bq[0];
        for (int m = 1; m < i; ++m) {
            const double wp_new = ap[static_cast<std::size_t>(m)] - bp[static_cast<std::size_t>(m)];
            const double wq_new = aq[static_cast<std::size_t>(m)] - bq[static_cast<std::size_t>(m)];
            const std::size_t inew = static_cast<std::size_t>(i - m), iold = static_cast<std::size_t>(i - m - 1);
            hist_p_fp += fp[inew] * wp_new + fp[iold] * bp[static_cast<std::size_t>(m)];
            hist_p_fm += fm[inew] * wp_new + fm[iold] * bp[static_cast<std::size_t>(m)];
            hist_q_fp += fp[inew] * wq_new + fp[iold] * bq[static_cast<std::size_t>(m)];
            hist_q_fm += fm[inew] * wq_new + fm[iold] * bq[static_cast<std::size_t>(m)];
        }
        const double base_p = w_plus[static_cast<std::size_t>(i)] + hist_p_fp - hist_q_fm;
        const double base_m = w_minus[static_cast<std::size_t>(i)] + hist_q_fp - hist_p_fm;

        // damped fixed point for the implicit endpoint values
        double up = tr.u_plus[static_cast<std::size_t>(i - 1)], um = tr.u_minus[static_cast<std::size_t>(i - 1)];
        double prev_delta = 0.0;
        for (int it = 0;; ++it) {
            const double up_next = base_p + cp0 * macro_detail::f_plus(up, j, k_width) - cq0 * macro_detail::f_minus(um, j, k_width);
            const double um_next = base_m + cq0 * macro_detail::f_plus(up, j, k_width) - cp0 * macro_detail::f_minus(um, j, k_width);
            double delta = std::max(std::abs(up_next - up), std::abs(um_next - um));
            double damp = (it > 4 && delta > 0.7 * prev_delta) ? 0.5 : 1.0;
            up += damp * (up_next - up);
            um += damp * (um_next - um);
            prev_delta = delta;
            if (delta < 1e-12) break;
            if (it > 200) throw std::runtime_error("trace fixed point failed to converge at t=" + std::to_string(i * h));
        }
        if (up < -1e-9 || up > 1.0 + 1e-9 || um < -1e-9 || um > 1.0 + 1e-9)
            throw std::runtime_error("trace solution left [0,1] at t=" + std::to_string(i * h) +
                                     " (u+=" + std::to_string(up) + ", u-=" + std::to_string(um) + ")");
        tr.u_plus[static_cast<std::size_t>(i)] = up;
        tr.u_minus[static_cast<std::size_t>(i)] = um;
        fp[static_cast<std::size_t>(i)] = macro_detail::f_plus(up, j, k_width);
        fm[static_cast<std::size_t>(i)] = macro_detail::f_minus(um, j, k_width);
    }
    return tr;
}

struct MacroSolution {
    std::vector<double> r_values;
    std::vector<double> times;
    std::vector<std::vector<double>> density; // density[time][r]
    BoundaryTraces traces;

    double at(std::size_t time_index, std::size_t r_index) const { return density[time_index][r_index]; }
};

/// rho(r,t) = int P_t(r,r') u0(r') dr'
///          + (j/2) int_0^t { P_s(r,1)(1-u+(t-s)^K) - P_s(r,-1)(1-(1-u-(t-s))^K) } ds
/// by the same product integration as the traces.  Every requested time must
/// lie on the trace grid.
inline MacroSolution reconstruct_density(const BoundaryTraces& tr, const MacroProfile& u0,
                                         const std::vector<double>& r_values, const std::vector<double>& t_values) {
    MacroSolution sol;
    sol.r_values = r_values;
    sol.times = t_values;
    sol.traces = tr;
    sol.density.assign(t_values.size(), std::vector<double>(r_values.size(), 0.0));

    const double j = tr.reservoir_rate;
    const int kw = tr.reservoir_width;
    const double h = tr.step;

    std::size_t max_i = 0;
    std::vector<std::size_t> t_index(t_values.size());
    for (std::size_t ti = 0; ti < t_values.size(); ++ti) {
        t_index[ti] = tr.index_of_time(t_values[ti]);
        max_i = std::max(max_i, t_index[ti]);
    }

    const bool constant_data = u0.is_constant;

    std::vector<double> fp(max_i + 1), fm(max_i + 1);
    for (std::size_t i = 0; i <= max_i; ++i) {
        fp[i] = macro_detail::f_plus(tr.u_plus[i], j, kw);
        fm[i] = macro_detail::f_minus(tr.u_minus[i], j, kw);
    }

    std::vector<double> a_pl(max_i), b_pl(max_i), a_mi(max_i), b_mi(max_i);
    for (std::size_t ri = 0; ri < r_values.size(); ++ri) {
        const double r = r_values[ri];
        if (r < -1.0 || r > 1.0) throw std::invalid_argument("r outside [-1,1]");
        for (std::size_t m = 0; m < max_i; ++m) {
            macro_detail::panel_moments([&](double s) { return neumann_kernel(s, r, 1.0); },
                                        static_cast<double>(m) * h, static_cast<double>(m + 1) * h, a_pl[m], b_pl[m]);
            macro_detail::panel_moments([&](double s) { return neumann_kernel(s, r, -1.0); },
                                        static_cast<double>(m) * h, static_cast<double>(m + 1) * h, a_mi[m], b_mi[m]);
        }
        for (std::size_t ti = 0; ti < t_values.size(); ++ti) {
            const std::size_t i = t_index[ti];
            const double t = tr.times[i];
            double free_term;
            if (constant_data) {
                free_term = u0(0.0);
            } else if (t == 0.0) {
                free_term = u0(r);
            } else {
                free_term = integrate_adaptive_split(
                    [&](double rp) { return neumann_kernel(t, r, rp) * u0(rp); }, -1.0, 1.0, u0.breakpoints, 1e-10);
            }
            double acc = 0.0;
            for (std::size_t m = 0; m < i; ++m) {
                const std::size_t inew = i - m, iold = i - m - 1;
                acc += fp[inew] * (a_pl[m] - b_pl[m]) + fp[iold] * b_pl[m];
                acc -= fm[inew] * (a_mi[m] - b_mi[m]) + fm[iold] * b_mi[m];
            }
            sol.density[ti][ri] = free_term + acc;
        }
    }
    return sol;
}

struct DirichletReport {
    double max_interior_residual = 0.0; // |d_t rho - (1/2) d_rr rho| by central differences
    double max_boundary_mismatch = 0.0; // |rho(+-1, t) - u_pm(t)|
};

/// Requires uniform interior r and t grids covering the solution.
inline DirichletReport check_dirichlet_form(const MacroSolution& sol) {
    DirichletReport rep;
    if (sol.times.size() < 3 || sol.r_values.size() < 3) throw std::invalid_argument("grid too small for stencils");
    const double dr = sol.r_values[1] - sol.r_values[0];
    const double dt = sol.times[1] - sol.times[0];
    for (std::size_t ti = 1; ti + 1 < sol.times.size(); ++ti) {
        for (std::size_t ri = 1; ri + 1 < sol.r_values.size(); ++ri) {
            const double ddt = (sol.density[ti + 1][ri] - sol.density[ti - 1][ri]) / (2.0 * dt);
            const double ddr2 = (sol.density[ti][ri + 1] - 2.0 * sol.density[ti][ri] + sol.density[ti][ri - 1]) / (dr * dr);
            rep.max_interior_residual = std::max(rep.max_interior_residual, std::abs(ddt - 0.5 * ddr2));
        }
    }
    for (std::size_t ti = 0; ti < sol.times.size(); ++ti) {
        const std::size_t i = sol.traces.index_of_time(sol.times[ti]);
        if (std::abs(sol.r_values.front() + 1.0) < 1e-12)
            rep.max_boundary_mismatch = std::max(rep.max_boundary_mismatch, std::abs(sol.density[ti].front() - sol.traces.u_minus[i]));
        if (std::abs(sol.r_values.back() - 1.0) < 1e-12)
            rep.max_boundary_mismatch = std::max(rep.max_boundary_mismatch, std::abs(sol.density[ti].back() - sol.traces.u_plus[i]));
    }
    return rep;
}

struct BoundaryFluxRow {
    double t;
    double slope_plus;   // one-sided d_r rho at +1
    double flux_plus;    // j (1 - rho(1,t)^K)
    double slope_minus;  // one-sided d_r rho at -1
    double flux_minus;   // j (1 - (1-rho(-1,t))^K)
};

/// One-sided 3-point derivative estimates at the boundary against the
/// nonlinear flux relation.
inline std::vector<BoundaryFluxRow> boundary_flux_check(const BoundaryTraces& tr, const MacroProfile& u0,
                                                        const std::vector<double>& t_values, double h_r = 0.005) {
    std::vector<double> rs{1.0, 1.0 - h_r, 1.0 - 2.0 * h_r, -1.0, -1.0 + h_r, -1.0 + 2.0 * h_r};
    MacroSolution sol = reconstruct_density(tr, u0, rs, t_values);
    std::vector<BoundaryFluxRow> rows;
    for (std::size_t ti = 0; ti < t_values.size(); ++ti) {
        BoundaryFluxRow row;
        row.t = t_values[ti];
        const auto& d = sol.density[ti];
        row.slope_plus = (3.0 * d[0] - 4.0 * d[1] + d[2]) / (2.0 * h_r);
        row.flux_plus = tr.reservoir_rate * (1.0 - std::pow(d[0], tr.reservoir_width));
        row.slope_minus = (-3.0 * d[3] + 4.0 * d[4] - d[5]) / (2.0 * h_r);
        row.flux_minus = tr.reservoir_rate * (1.0 - std::pow(1.0 - d[3], tr.reservoir_width));
        rows.push_back(row);
    }
    return rows;
}

struct StationaryProfile {
    double slope = 0.0; // b: the profile is r -> 1/2 + b r
    double value(double r) const { return 0.5 + slope * r; }
};

/// Long-time limit: equal boundary fluxes force the midpoint value 1/2 and
/// the slope solves b = j (1 - (1/2 + b)^K) (bisection to 1e-12).
inline StationaryProfile stationary_profile(double j, int k_width) {
    if (j < 0.0 || k_width < 1) throw std::invalid_argument("need j >= 0, K >= 1");
    if (j == 0.0) return {0.0};
    auto g = [&](double b) { return j * (1.0 - std::pow(0.5 + b, k_width)) - b; };
    double lo = 0.0, hi = std::min(j, 0.5);
    if (!(g(lo) >= 0.0 && g(hi) <= 0.0)) throw std::runtime_error("stationary slope bracket failed");
    for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
        const double mid = 0.5 * (lo + hi);
        (g(mid) >= 0.0 ? lo : hi) = mid;
    }
    return {0.5 * (lo + hi)};
}

} // namespace sepr
