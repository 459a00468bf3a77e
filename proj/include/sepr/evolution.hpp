#pragma once

// The discretized time evolution
//   d/dt rho = (1/2) Delta_eps rho + eps^{-1} (j/2) (1_{I+} D+ rho - 1_{I-} D- rho)
// integrated two ways:
//  - Strang splitting with the exact diffusion kernel for the half-steps and
//    exact exponential integration of the birth/death block with the product
//    terms frozen at the midpoint.  Both sub-flows map [0,1] into itself, so
//    every profile stays in [0,1] exactly.
//  - The equivalent Volterra integral form, marched in the diffusion
//    eigenbasis with piecewise-linear Duhamel sources and a per-step Picard
//    iteration.
// Plus the regularized evolution (free kernel up to delta, then the full
// dynamics), equicontinuity moduli, and the reservoir-block mass balance.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "kernels.hpp"
#include "model.hpp"

namespace sepr {

struct DiscreteTrajectory {
    ModelParams params;
    std::vector<double> times;
    std::vector<DensityProfile> profiles;
    std::string scheme;
    double step_size = 0.0;

    const DensityProfile& at_time(double t, double tol = 1e-12) const {
        for (std::size_t i = 0; i < times.size(); ++i)
            if (std::abs(times[i] - t) <= tol) return profiles[i];
        throw std::invalid_argument("trajectory does not contain requested time");
    }
};

struct RegularizedTrajectory : DiscreteTrajectory {
    double delta = 0.0;
};

namespace detail {

/// Banded representation of the diffusion propagator e^{(t/2) Delta_eps},
/// rows renormalized to unit mass (truncation tail ~1e-17).
struct PropagatorBand {
    int m = 0;
    std::vector<int> lo;
    std::vector<std::vector<double>> w;

    PropagatorBand() = default;
    PropagatorBand(double t, const ModelParams& p) : m(p.num_sites()), lo(static_cast<std::size_t>(m)), w(static_cast<std::size_t>(m)) {
        const auto mat = ReflectedWalk(t, p).matrix();
        for (int i = 0; i < m; ++i) {
            int a = 0, b = m - 1;
            while (a < m - 1 && mat[static_cast<std::size_t>(i) * m + a] < 1e-17) ++a;
            while (b > 0 && mat[static_cast<std::size_t>(i) * m + b] < 1e-17) --b;
            double sum = 0.0;
            for (int jj = a; jj <= b; ++jj) sum += mat[static_cast<std::size_t>(i) * m + jj];
            lo[static_cast<std::size_t>(i)] = a;
            auto& row = w[static_cast<std::size_t>(i)];
            row.resize(static_cast<std::size_t>(b - a + 1));
            for (int jj = a; jj <= b; ++jj) row[static_cast<std::size_t>(jj - a)] = mat[static_cast<std::size_t>(i) * m + jj] / sum;
        }
    }

    void apply(const std::vector<double>& in, std::vector<double>& out) const {
        for (int i = 0; i < m; ++i) {
            const auto& row = w[static_cast<std::size_t>(i)];
            const double* src = in.data() + lo[static_cast<std::size_t>(i)];
            double s = 0.0;
            for (std::size_t jj = 0; jj < row.size(); ++jj) s += row[jj] * src[jj];
            out[static_cast<std::size_t>(i)] = s;
        }
    }
};

/// Exact exponential step of the birth/death block with rates frozen at the
/// midpoint.  Rates are nonnegative, so the block maps [0,1] into itself for
/// any dt.
inline void reservoir_step(const ModelParams& p, std::vector<double>& v, double dt) {
    if (p.reservoir_rate == 0.0) return;
    const int n = p.half_width, k = p.reservoir_width;
    const double amp = p.reservoir_event_rate(); // eps^{-1} j / 2

    auto rates = [&](const std::vector<double>& u, std::vector<double>& plus, std::vector<double>& minus) {
        double prod = 1.0;
        for (int i = 0; i < k; ++i) { // x = N-i
            plus[static_cast<std::size_t>(i)] = amp * prod;
            prod *= u[static_cast<std::size_t>(p.index_of(n - i))];
        }
        prod = 1.0;
        for (int i = 0; i < k; ++i) { // x = -N+i
            minus[static_cast<std::size_t>(i)] = amp * prod;
            prod *= 1.0 - u[static_cast<std::size_t>(p.index_of(-n + i))];
        }
    };

    std::vector<double> plus(static_cast<std::size_t>(k)), minus(static_cast<std::size_t>(k));
    std::vector<double> mid = v;
    rates(v, plus, minus);
    for (int i = 0; i < k; ++i) {
        auto& up = mid[static_cast<std::size_t>(p.index_of(n - i))];
        up = 1.0 - (1.0 - up) * std::exp(-plus[static_cast<std::size_t>(i)] * 0.5 * dt);
        auto& um = mid[static_cast<std::size_t>(p.index_of(-n + i))];
        um *= std::exp(-minus[static_cast<std::size_t>(i)] * 0.5 * dt);
    }
    rates(mid, plus, minus);
    for (int i = 0; i < k; ++i) {
        auto& up = v[static_cast<std::size_t>(p.index_of(n - i))];
        up = 1.0 - (1.0 - up) * std::exp(-plus[static_cast<std::size_t>(i)] * dt);
        auto& um = v[static_cast<std::size_t>(p.index_of(-n + i))];
        um *= std::exp(-minus[static_cast<std::size_t>(i)] * dt);
    }
}

inline void check_initial(const DensityProfile& rho0, const ModelParams& p) {
    if (rho0.num_sites() != p.num_sites()) throw std::invalid_argument("profile size mismatch");
    for (double v : rho0.values)
        if (v < 0.0 || v > 1.0) throw std::invalid_argument("initial profile must take values in [0,1]");
}

inline void check_outputs(const std::vector<double>& output_times, double t_final) {
    for (std::size_t i = 0; i < output_times.size(); ++i) {
        if (output_times[i] < 0.0 || output_times[i] > t_final + 1e-12)
            throw std::invalid_argument("output times must lie in [0, t_final]");
        if (i > 0 && output_times[i] < output_times[i - 1]) throw std::invalid_argument("output times must be sorted");
    }
}

} // namespace detail

/// Strang splitting march.  Default step eps^2/2; output profiles are
/// linearly interpolated between internal steps (recorded O(dt) error).
inline DiscreteTrajectory evolve_discrete(const ModelParams& p, const DensityProfile& rho0, double t_final,
                                          const std::vector<double>& output_times, double dt = 0.0) {
    detail::check_initial(rho0, p);
    detail::check_outputs(output_times, t_final);
    if (dt <= 0.0) dt = 0.5 * p.epsilon * p.epsilon;

    DiscreteTrajectory traj;
    traj.params = p;
    traj.scheme = "strang-splitting";
    traj.step_size = dt;

    detail::PropagatorBand half(0.5 * dt, p);
    std::vector<double> cur = rho0.values, prev(cur.size()), buf(cur.size());

    std::size_t oi = 0;
    auto emit_exact = [&](double t, const std::vector<double>& v) {
        DensityProfile prof(p.half_width, 0.0, t);
        prof.values = v;
        traj.times.push_back(t);
        traj.profiles.push_back(std::move(prof));
    };
    while (oi < output_times.size() && output_times[oi] <= 1e-14) emit_exact(output_times[oi++], cur);

    double t = 0.0;
    while (t < t_final - 1e-12 && oi <= output_times.size()) {
        const double step = std::min(dt, t_final - t);
        prev = cur;
        if (std::abs(step - dt) < 1e-15) {
            half.apply(cur, buf);
            detail::reservoir_step(p, buf, step);
            half.apply(buf, cur);
        } else {
            detail::PropagatorBand part(0.5 * step, p);
            part.apply(cur, buf);
            detail::reservoir_step(p, buf, step);
            part.apply(buf, cur);
        }
        const double t_next = t + step;
        while (oi < output_times.size() && output_times[oi] <= t_next + 1e-12) {
            const double to = output_times[oi];
            const double a = (to - t) / step;
            DensityProfile prof(p.half_width, 0.0, to);
            for (std::size_t i = 0; i < cur.size(); ++i) prof.values[i] = (1.0 - a) * prev[i] + a * cur[i];
            traj.times.push_back(to);
            traj.profiles.push_back(std::move(prof));
            ++oi;
        }
        t = t_next;
        if (oi >= output_times.size() && !output_times.empty()) break;
    }
    return traj;
}

/// Volterra integral form: the Duhamel representation marched in the
/// diffusion eigenbasis, piecewise-linear reservoir sources on a uniform
/// grid, per-step Picard iteration to 1e-10 sup-norm increment.
inline DiscreteTrajectory evolve_integral_form(const ModelParams& p, const DensityProfile& rho0, double t_final,
                                               const std::vector<double>& output_times, double h = 0.0) {
    detail::check_initial(rho0, p);
    detail::check_outputs(output_times, t_final);
    if (h <= 0.0) h = 0.25 * p.epsilon * p.epsilon;

    const SpectralHeat heat(p);
    const int m = p.num_sites(), n = p.half_width, k = p.reservoir_width;
    const double amp = p.reservoir_event_rate();

    std::vector<int> res_sites;
    for (int i = 0; i < k; ++i) res_sites.push_back(n - i);
    for (int i = 0; i < k; ++i) res_sites.push_back(-n + i);
    const std::size_t nres = res_sites.size();

    // signed sources: +D+ on I+, -D- on I-
    auto sources = [&](const std::vector<double>& res_values, std::vector<double>& g) {
        double prod = 1.0;
        for (std::size_t i = 0; i < static_cast<std::size_t>(k); ++i) {
            g[i] = amp * (1.0 - res_values[i]) * prod;
            prod *= res_values[i];
        }
        prod = 1.0;
        for (std::size_t i = 0; i < static_cast<std::size_t>(k); ++i) {
            g[k + i] = -amp * res_values[k + i] * prod;
            prod *= 1.0 - res_values[k + i];
        }
    };

    const int n_steps = std::max(1, static_cast<int>(std::ceil(t_final / h - 1e-9)));
    h = t_final / n_steps;

    // per-mode step factors: decay E, and the two linear-source weights
    const auto& rates = heat.rates();
    std::vector<double> decay(static_cast<std::size_t>(m)), w_old(static_cast<std::size_t>(m)), w_new(static_cast<std::size_t>(m));
    for (int kk = 0; kk < m; ++kk) {
        const double z = rates[static_cast<std::size_t>(kk)] * h;
        decay[static_cast<std::size_t>(kk)] = std::exp(-z);
        double phi1, psi; // (1-e^-z)/z and (1-(1+z)e^-z)/z^2
        if (z < 1e-4) {
            phi1 = 1.0 - z / 2.0 + z * z / 6.0 - z * z * z / 24.0;
            psi = 0.5 - z / 3.0 + z * z / 8.0 - z * z * z / 30.0;
        } else {
            const double ez = std::exp(-z);
            phi1 = (1.0 - ez) / z;
            psi = (1.0 - (1.0 + z) * ez) / (z * z);
        }
        w_old[static_cast<std::size_t>(kk)] = h * psi;
        w_new[static_cast<std::size_t>(kk)] = h * (phi1 - psi);
    }

    std::vector<double> modes = heat.to_modes(rho0.values), modes_prev = modes, trial(static_cast<std::size_t>(m));
    std::vector<double> res_vals(nres), g_old(nres), g_new(nres), g_trial(nres);

    auto reconstruct_res = [&](const std::vector<double>& md, std::vector<double>& out) {
        for (std::size_t s = 0; s < nres; ++s) {
            double v = 0.0;
            for (int kk = 0; kk < m; ++kk) v += md[static_cast<std::size_t>(kk)] * heat.basis(kk, res_sites[s]);
            out[s] = v;
        }
    };

    DiscreteTrajectory traj;
    traj.params = p;
    traj.scheme = "volterra-duhamel";
    traj.step_size = h;

    std::size_t oi = 0;
    auto emit = [&](double to, const std::vector<double>& md_a, const std::vector<double>& md_b, double frac) {
        DensityProfile prof(p.half_width, 0.0, to);
        std::vector<double> md(static_cast<std::size_t>(m));
        for (int kk = 0; kk < m; ++kk)
            md[static_cast<std::size_t>(kk)] = (1.0 - frac) * md_a[static_cast<std::size_t>(kk)] + frac * md_b[static_cast<std::size_t>(kk)];
        prof.values = heat.from_modes(md);
        traj.times.push_back(to);
        traj.profiles.push_back(std::move(prof));
        ++oi;
    };
    while (oi < output_times.size() && output_times[oi] <= 1e-14) emit(output_times[oi], modes, modes, 0.0);

    reconstruct_res(modes, res_vals);
    sources(res_vals, g_old);

    for (int step = 1; step <= n_steps; ++step) {
        modes_prev = modes;
        g_new = g_old; // initial Picard guess: constant extrapolation
        int it = 0;
        for (;; ++it) {
            for (int kk = 0; kk < m; ++kk) {
                double forced = 0.0;
                for (std::size_t s = 0; s < nres; ++s)
                    forced += heat.basis(kk, res_sites[s]) *
                              (w_old[static_cast<std::size_t>(kk)] * g_old[s] + w_new[static_cast<std::size_t>(kk)] * g_new[s]);
                trial[static_cast<std::size_t>(kk)] = decay[static_cast<std::size_t>(kk)] * modes_prev[static_cast<std::size_t>(kk)] + forced;
            }
            reconstruct_res(trial, res_vals);
            sources(res_vals, g_trial);
            double inc = 0.0;
            for (std::size_t s = 0; s < nres; ++s) inc = std::max(inc, std::abs(g_trial[s] - g_new[s]));
            g_new = g_trial;
            if (inc < 1e-10) break;
            if (it >= 50)
                throw std::runtime_error("volterra step failed to contract (step " + std::to_string(step) +
                                         ", increment " + std::to_string(inc) + ")");
        }
        modes = trial;
        g_old = g_new;

        const double t_prev = (step - 1) * h, t_next = step * h;
        while (oi < output_times.size() && output_times[oi] <= t_next + 1e-12)
            emit(output_times[oi], modes_prev, modes, (output_times[oi] - t_prev) / h);
    }
    return traj;
}

/// Free kernel evolution on [0, delta], then the full dynamics.
inline RegularizedTrajectory evolve_regularized(const ModelParams& p, const DensityProfile& rho0, double delta,
                                                double t_final, const std::vector<double>& output_times, double dt = 0.0) {
    if (!(delta > 0.0) || delta >= t_final) throw std::invalid_argument("need 0 < delta < t_final");
    detail::check_initial(rho0, p);
    detail::check_outputs(output_times, t_final);

    const SpectralHeat heat(p);
    RegularizedTrajectory traj;
    traj.params = p;
    traj.scheme = "regularized";
    traj.delta = delta;

    std::vector<double> late_outputs;
    for (double to : output_times) {
        if (to < delta - 1e-14) {
            DensityProfile prof(p.half_width, 0.0, to);
            prof.values = heat.propagate(to, rho0.values);
            traj.times.push_back(to);
            traj.profiles.push_back(std::move(prof));
        } else {
            late_outputs.push_back(to - delta);
        }
    }

    DensityProfile at_delta(p.half_width, 0.0, delta);
    at_delta.values = heat.propagate(delta, rho0.values);
    for (auto& v : at_delta.values) v = std::min(1.0, std::max(0.0, v)); // roundoff guard at the spectral level

    DiscreteTrajectory tail = evolve_discrete(p, at_delta, t_final - delta, late_outputs, dt);
    traj.step_size = tail.step_size;
    for (std::size_t i = 0; i < tail.times.size(); ++i) {
        tail.profiles[i].time_label = tail.times[i] + delta;
        traj.times.push_back(tail.times[i] + delta);
        traj.profiles.push_back(std::move(tail.profiles[i]));
    }
    return traj;
}

// ---------------------------------------------------------------------------
// Equicontinuity moduli and mass balance.
// ---------------------------------------------------------------------------

struct ContinuityReport {
    double fitted_space_constant = 0.0; // c in min{1, c (eps log+ (eps^-2 t) + (eps^-2 t)^{-1/2})}
    double fitted_time_constant = 0.0;  // c in min{1, c (sqrt(s/t) + sqrt(s) log(t/s))}
    double max_space_modulus = 0.0;
    double max_time_modulus = 0.0;
};

inline ContinuityReport continuity_moduli(const DiscreteTrajectory& traj) {
    const ModelParams& p = traj.params;
    ContinuityReport rep;
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        const double t = traj.times[i];
        if (t <= 0.0) continue;
        const auto& prof = traj.profiles[i];
        double sup = 0.0;
        for (int x = -p.half_width; x < p.half_width; ++x) sup = std::max(sup, std::abs(prof.at(x + 1) - prof.at(x)));
        rep.max_space_modulus = std::max(rep.max_space_modulus, sup);
        const double scaled_t = t / (p.epsilon * p.epsilon);
        const double shape = std::min(1.0, p.epsilon * std::max(std::log(scaled_t), 1.0) + 1.0 / std::sqrt(scaled_t));
        rep.fitted_space_constant = std::max(rep.fitted_space_constant, sup / shape);
    }
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        for (std::size_t jj = i + 1; jj < traj.times.size(); ++jj) {
            const double t = traj.times[i], s = traj.times[jj] - traj.times[i];
            if (t <= 0.0 || s <= 0.0 || s >= t) continue;
            double sup = 0.0;
            for (int x = -p.half_width; x <= p.half_width; ++x)
                sup = std::max(sup, std::abs(traj.profiles[jj].at(x) - traj.profiles[i].at(x)));
            rep.max_time_modulus = std::max(rep.max_time_modulus, sup);
            const double shape = std::min(1.0, std::sqrt(s / t) + std::sqrt(s) * std::log(t / s));
            rep.fitted_time_constant = std::max(rep.fitted_time_constant, sup / shape);
        }
    }
    return rep;
}

/// Residual of the reservoir-block mass balance over [t0, t1]:
///   eps (sum_{x=N-K}^{N} rho(x,t1) - rho(x,t0))
///     = int_{t0}^{t1} ( -J(s)/2 + sum_{y in I+} (j/2) D+rho(y,s) ) ds,
/// J(s) = eps^{-1} (rho(N-K,s) - rho(N-K-1,s)); trapezoid on the native step.
inline double discrete_mass_balance(const ModelParams& p, const DensityProfile& rho0, double t0, double t1,
                                    double dt = 0.0) {
    if (!(0.0 <= t0 && t0 < t1)) throw std::invalid_argument("need 0 <= t0 < t1");
    if (dt <= 0.0) dt = 0.5 * p.epsilon * p.epsilon;
    const int n = p.half_width, k = p.reservoir_width;

    const int steps_to_t0 = static_cast<int>(std::llround(t0 / dt));
    const int steps_to_t1 = static_cast<int>(std::llround(t1 / dt));
    if (std::abs(steps_to_t0 * dt - t0) > 1e-9 || std::abs(steps_to_t1 * dt - t1) > 1e-9)
        throw std::invalid_argument("window endpoints must be multiples of dt");

    detail::PropagatorBand half(0.5 * dt, p);
    std::vector<double> cur = rho0.values, buf(cur.size());

    auto block_mass = [&]() {
        double s = 0.0;
        for (int x = n - k; x <= n; ++x) s += cur[static_cast<std::size_t>(p.index_of(x))];
        return s;
    };
    auto integrand = [&]() {
        const double flux = (cur[static_cast<std::size_t>(p.index_of(n - k))] - cur[static_cast<std::size_t>(p.index_of(n - k - 1))]) / p.epsilon;
        double births = 0.0, prod = 1.0;
        for (int i = 0; i < k; ++i) {
            births += 0.5 * p.reservoir_rate * (1.0 - cur[static_cast<std::size_t>(p.index_of(n - i))]) * prod;
            prod *= cur[static_cast<std::size_t>(p.index_of(n - i))];
        }
        return -0.5 * flux + births;
    };

    double mass0 = 0.0, integral = 0.0;
    for (int step = 0; step < steps_to_t1; ++step) {
        if (step == steps_to_t0) mass0 = block_mass();
        const double f_before = integrand();
        half.apply(cur, buf);
        detail::reservoir_step(p, buf, dt);
        half.apply(buf, cur);
        if (step >= steps_to_t0) integral += 0.5 * dt * (f_before + integrand());
    }
    if (steps_to_t0 == steps_to_t1) mass0 = block_mass();
    return p.epsilon * (block_mass() - mass0) - integral;
}

} // namespace sepr
