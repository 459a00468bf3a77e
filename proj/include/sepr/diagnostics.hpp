#pragma once

// Post-processing over immutable ensemble data: currents (gradient and
// counting estimators), boundary currents, the reservoir-edge gradients
// Theta+-, centered product moments (v-statistics), block-average
// deviations, the hydrodynamic gap, and the Fourier-law comparison.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "evolution.hpp"
#include "kmc.hpp"
#include "macro.hpp"
#include "model.hpp"

namespace sepr {

struct Estimate {
    double value = 0.0;
    double stderr_ = 0.0;
};

namespace diag_detail {

inline int obs_index(const Ensemble& e, double t, double tol = 1e-9) {
    for (std::size_t i = 0; i < e.options.observation_times.size(); ++i)
        if (std::abs(e.options.observation_times[i] - t) <= tol) return static_cast<int>(i);
    throw std::invalid_argument("ensemble was not observed at the requested time");
}

template <class PerReplica>
Estimate replica_mean(const Ensemble& e, PerReplica&& f) {
    double sum = 0.0, sumsq = 0.0;
    for (const auto& rec : e.records) {
        const double v = f(rec);
        sum += v;
        sumsq += v * v;
    }
    const double n = static_cast<double>(e.records.size());
    Estimate est;
    est.value = sum / n;
    const double var = std::max(0.0, (sumsq - sum * sum / n) / (n - 1.0));
    est.stderr_ = std::sqrt(var / n);
    return est;
}

} // namespace diag_detail

struct BulkCurrent {
    int bond = 0;
    double t = 0.0;
    double window = 0.0;
    Estimate gradient; // -(1/2) E[(eta(x+1)-eta(x))/eps] from snapshots
    Estimate counting; // eps * net crossings per unit time over [t, t+window]
};

inline BulkCurrent bulk_current(const Ensemble& e, int bond, double t, double window) {
    const ModelParams& p = e.params;
    if (std::abs(bond) > p.half_width - p.reservoir_width)
        throw std::invalid_argument("bulk current requires |x| <= N-K");
    BulkCurrent out;
    out.bond = bond;
    out.t = t;
    out.window = window;

    const int obs = diag_detail::obs_index(e, t);
    const int ia = p.index_of(bond), ib = p.index_of(bond + 1);
    out.gradient = diag_detail::replica_mean(e, [&](const ReplicaRecord& r) {
        const double a = r.occupied(obs, ia) ? 1.0 : 0.0;
        const double b = r.occupied(obs, ib) ? 1.0 : 0.0;
        return -0.5 * (b - a) / p.epsilon;
    });

    if (window > 0.0) {
        const int obs2 = diag_detail::obs_index(e, t + window);
        const int slot = e.bond_slot(bond);
        if (slot < 0) throw std::invalid_argument("bond was not tracked by the ensemble");
        const std::size_t nb = e.options.tracked_bonds.size();
        out.counting = diag_detail::replica_mean(e, [&](const ReplicaRecord& r) {
            const auto c1 = r.crossings[static_cast<std::size_t>(obs) * nb + static_cast<std::size_t>(slot)];
            const auto c2 = r.crossings[static_cast<std::size_t>(obs2) * nb + static_cast<std::size_t>(slot)];
            return p.epsilon * static_cast<double>(c2 - c1) / window;
        });
    }
    return out;
}

struct BoundaryCurrent {
    double t = 0.0;
    double window = 0.0;
    Estimate snapshot_plus;  // -(j/2) E[sum_{y in I+} D+ eta(y)]
    Estimate snapshot_minus; // -(j/2) E[sum_{y in I-} D- eta(y)]
    Estimate counter_plus;   // -eps * birth rate over [t, t+window]
    Estimate counter_minus;  // -eps * death rate over [t, t+window]
};

inline BoundaryCurrent boundary_current(const Ensemble& e, double t, double window = 0.0) {
    const ModelParams& p = e.params;
    BoundaryCurrent out;
    out.t = t;
    out.window = window;
    const int obs = diag_detail::obs_index(e, t);

    // sum_y D+eta(y) = 1{I+ not full}, sum_y D-eta(y) = 1{I- not empty}
    out.snapshot_plus = diag_detail::replica_mean(e, [&](const ReplicaRecord& r) {
        for (int x = p.half_width - p.reservoir_width + 1; x <= p.half_width; ++x)
            if (!r.occupied(obs, p.index_of(x))) return -0.5 * p.reservoir_rate;
        return 0.0;
    });
    out.snapshot_minus = diag_detail::replica_mean(e, [&](const ReplicaRecord& r) {
        for (int x = -p.half_width; x <= -p.half_width + p.reservoir_width - 1; ++x)
            if (r.occupied(obs, p.index_of(x))) return -0.5 * p.reservoir_rate;
        return 0.0;
    });

    if (window > 0.0) {
        const int obs2 = diag_detail::obs_index(e, t + window);
        out.counter_plus = diag_detail::replica_mean(e, [&](const ReplicaRecord& r) {
            return -p.epsilon * static_cast<double>(r.births[static_cast<std::size_t>(obs2)] - r.births[static_cast<std::size_t>(obs)]) / window;
        });
        out.counter_minus = diag_detail::replica_mean(e, [&](const ReplicaRecord& r) {
            return -p.epsilon * static_cast<double>(r.deaths[static_cast<std::size_t>(obs2)] - r.deaths[static_cast<std::size_t>(obs)]) / window;
        });
    }
    return out;
}

struct ThetaPair {
    Estimate plus;  // eps^{-1} (mean(N-K) - mean(N-K-1))
    Estimate minus; // eps^{-1} (mean(-N+K+1) - mean(-N+K))
};

inline ThetaPair reservoir_edge_gradient(const Ensemble& e, double t) {
    const ModelParams& p = e.params;
    const int obs = diag_detail::obs_index(e, t);
    const int n = p.half_width, k = p.reservoir_width;
    ThetaPair out;
    out.plus = diag_detail::replica_mean(e, [&](const ReplicaRecord& r) {
        return ((r.occupied(obs, p.index_of(n - k)) ? 1.0 : 0.0) - (r.occupied(obs, p.index_of(n - k - 1)) ? 1.0 : 0.0)) / p.epsilon;
    });
    out.minus = diag_detail::replica_mean(e, [&](const ReplicaRecord& r) {
        return ((r.occupied(obs, p.index_of(-n + k + 1)) ? 1.0 : 0.0) - (r.occupied(obs, p.index_of(-n + k)) ? 1.0 : 0.0)) / p.epsilon;
    });
    return out;
}

inline ThetaPair reservoir_edge_gradient(const DiscreteTrajectory& traj, double t) {
    const ModelParams& p = traj.params;
    const auto& prof = traj.at_time(t);
    const int n = p.half_width, k = p.reservoir_width;
    ThetaPair out;
    out.plus = {(prof.at(n - k) - prof.at(n - k - 1)) / p.epsilon, 0.0};
    out.minus = {(prof.at(-n + k + 1) - prof.at(-n + k)) / p.epsilon, 0.0};
    return out;
}

struct VStatistic {
    std::vector<int> sites;
    double t = 0.0;
    Estimate estimate;
    int half_width = 0;
};

/// Sample mean of prod_i (eta(x_i,t) - rho_eps(x_i,t)); sites distinct.
inline VStatistic v_statistic(const Ensemble& e, const DiscreteTrajectory& rho_eps, const std::vector<int>& sites, double t) {
    for (std::size_t i = 0; i < sites.size(); ++i)
        for (std::size_t k = i + 1; k < sites.size(); ++k)
            if (sites[i] == sites[k]) throw std::invalid_argument("sites must be distinct");
    const int obs = diag_detail::obs_index(e, t);
    const auto& prof = rho_eps.at_time(t);
    VStatistic out;
    out.sites = sites;
    out.t = t;
    out.half_width = e.params.half_width;
    std::vector<int> idx;
    std::vector<double> ref;
    for (int x : sites) {
        idx.push_back(e.params.index_of(x));
        ref.push_back(prof.at(x));
    }
    out.estimate = diag_detail::replica_mean(e, [&](const ReplicaRecord& r) {
        double prod = 1.0;
        for (std::size_t i = 0; i < idx.size(); ++i) prod *= (r.occupied(obs, idx[i]) ? 1.0 : 0.0) - ref[i];
        return prod;
    });
    return out;
}

/// Empirical probability that sup_x | block mean of eta - block mean of
/// rho_eps | >= delta, blocks J_M(x) = [x-M, x+M] cap Lambda_N, M = floor(N^a).
inline double block_average_deviation(const Ensemble& e, const DiscreteTrajectory& rho_eps, double t, double a, double delta) {
    const ModelParams& p = e.params;
    const int m = p.num_sites();
    const int block = static_cast<int>(std::floor(std::pow(p.half_width, a)));
    if (block < 2) throw std::invalid_argument("block size floor(N^a) must be >= 2");
    const int obs = diag_detail::obs_index(e, t);
    const auto& prof = rho_eps.at_time(t);

    std::vector<double> ref_prefix(static_cast<std::size_t>(m) + 1, 0.0);
    for (int i = 0; i < m; ++i) ref_prefix[static_cast<std::size_t>(i) + 1] = ref_prefix[static_cast<std::size_t>(i)] + prof.values[static_cast<std::size_t>(i)];

    std::size_t exceed = 0;
    std::vector<double> occ_prefix(static_cast<std::size_t>(m) + 1, 0.0);
    for (const auto& rec : e.records) {
        for (int i = 0; i < m; ++i)
            occ_prefix[static_cast<std::size_t>(i) + 1] = occ_prefix[static_cast<std::size_t>(i)] + (rec.occupied(obs, i) ? 1.0 : 0.0);
        double sup = 0.0;
        for (int i = 0; i < m; ++i) {
            const int lo = std::max(0, i - block), hi = std::min(m - 1, i + block);
            const double inv = 1.0 / (hi - lo + 1);
            const double gap = std::abs((occ_prefix[static_cast<std::size_t>(hi) + 1] - occ_prefix[static_cast<std::size_t>(lo)]) -
                                        (ref_prefix[static_cast<std::size_t>(hi) + 1] - ref_prefix[static_cast<std::size_t>(lo)])) *
                               inv;
            sup = std::max(sup, gap);
        }
        if (sup >= delta) ++exceed;
    }
    return static_cast<double>(exceed) / static_cast<double>(e.records.size());
}

/// sup over lattice sites and trajectory times inside [t0, t1] of
/// |rho_eps(x,t) - rho(eps x, t)|.  The macro solution must be evaluated on
/// the lattice grid eps*x and contain every trajectory time in the window.
inline double hydrodynamic_gap(const DiscreteTrajectory& traj, const MacroSolution& sol, double t0, double t1) {
    const ModelParams& p = traj.params;
    if (static_cast<int>(sol.r_values.size()) != p.num_sites()) throw std::invalid_argument("macro grid must match the lattice");
    for (int x = -p.half_width; x <= p.half_width; ++x)
        if (std::abs(sol.r_values[static_cast<std::size_t>(p.index_of(x))] - p.epsilon * x) > 1e-12)
            throw std::invalid_argument("macro grid must be the lattice image eps*x");

    double gap = 0.0;
    for (std::size_t ti = 0; ti < traj.times.size(); ++ti) {
        const double t = traj.times[ti];
        if (t < t0 - 1e-12 || t > t1 + 1e-12) continue;
        std::size_t mi = sol.times.size();
        for (std::size_t s = 0; s < sol.times.size(); ++s)
            if (std::abs(sol.times[s] - t) <= 1e-9) { mi = s; break; }
        if (mi == sol.times.size()) throw std::invalid_argument("macro solution missing trajectory time");
        for (int i = 0; i < p.num_sites(); ++i)
            gap = std::max(gap, std::abs(traj.profiles[ti].values[static_cast<std::size_t>(i)] - sol.density[mi][static_cast<std::size_t>(i)]));
    }
    return gap;
}

// ---------------------------------------------------------------------------
// Fourier-law comparison.
// ---------------------------------------------------------------------------

/// d_r rho from the reconstructed density: 5-point central stencil at
/// interior points, one-sided 3-point at the boundaries.
inline double macro_slope(const BoundaryTraces& tr, const MacroProfile& u0, double r, double t, double h_r = 0.005) {
    if (r >= 1.0 - 1e-12) {
        auto rows = boundary_flux_check(tr, u0, {t}, h_r);
        return rows[0].slope_plus;
    }
    if (r <= -1.0 + 1e-12) {
        auto rows = boundary_flux_check(tr, u0, {t}, h_r);
        return rows[0].slope_minus;
    }
    std::vector<double> rs{r - 2 * h_r, r - h_r, r, r + h_r, r + 2 * h_r};
    MacroSolution sol = reconstruct_density(tr, u0, rs, {t});
    const auto& d = sol.density[0];
    return (-d[4] + 8.0 * d[3] - 8.0 * d[1] + d[0]) / (12.0 * h_r);
}

struct FourierRow {
    std::string location;  // "bulk r=..." or "boundary +1" / "boundary -1"
    std::string estimator; // "gradient", "counting", "snapshot"
    double t = 0.0;
    Estimate current;
    double half_slope = 0.0; // -(1/2) d_r rho from the macro solution
    double gap = 0.0;
};

/// Compare MC current estimators against -(1/2) d_r rho of the macro
/// solution, in the bulk and at the boundaries.
inline std::vector<FourierRow> fourier_check(const Ensemble& e, const BoundaryTraces& tr, const MacroProfile& u0,
                                             const std::vector<double>& interior_points, double t, double window) {
    std::vector<FourierRow> rows;
    const ModelParams& p = e.params;
    for (double r : interior_points) {
        const int bond = static_cast<int>(std::floor(r / p.epsilon));
        const BulkCurrent bc = bulk_current(e, bond, t, window);
        const double hs = -0.5 * macro_slope(tr, u0, r, t);
        rows.push_back({"bulk r=" + std::to_string(r), "gradient", t, bc.gradient, hs, bc.gradient.value - hs});
        rows.push_back({"bulk r=" + std::to_string(r), "counting", t, bc.counting, hs, bc.counting.value - hs});
    }
    const BoundaryCurrent bd = boundary_current(e, t, window);
    const double hs_plus = -0.5 * macro_slope(tr, u0, 1.0, t);
    const double hs_minus = -0.5 * macro_slope(tr, u0, -1.0, t);
    rows.push_back({"boundary +1", "snapshot", t, bd.snapshot_plus, hs_plus, bd.snapshot_plus.value - hs_plus});
    rows.push_back({"boundary +1", "counter", t, bd.counter_plus, hs_plus, bd.counter_plus.value - hs_plus});
    rows.push_back({"boundary -1", "snapshot", t, bd.snapshot_minus, hs_minus, bd.snapshot_minus.value - hs_minus});
    rows.push_back({"boundary -1", "counter", t, bd.counter_minus, hs_minus, bd.counter_minus.value - hs_minus});
    return rows;
}

} // namespace sepr
