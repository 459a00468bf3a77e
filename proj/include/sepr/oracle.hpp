#pragma once

// Exact master-equation evolution on the full state space {0,1}^{2N+1} for
// tiny N.  Ground truth for the Monte Carlo simulator, for the mean
// dynamics, and for exact centered product moments.  States are indexed by
// configuration bitmask with site x at bit x+N.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "model.hpp"

namespace sepr {

/// Probability vector over configuration bitmasks.
struct LawVector {
    std::vector<double> p;

    double total() const {
        double s = 0.0;
        for (double v : p) s += v;
        return s;
    }
    bool is_distribution(double tol = 1e-12) const {
        for (double v : p)
            if (v < -tol) return false;
        return std::abs(total() - 1.0) <= tol;
    }
};

/// Sparse conservative rate matrix over configuration bitmasks.
struct GeneratorMatrix {
    int num_states = 0;
    std::vector<std::vector<std::pair<std::uint32_t, double>>> jumps; // per state: (target, rate)
    std::vector<double> exit_rate;                                    // total outflow per state
};

inline GeneratorMatrix build_generator(const ModelParams& params) {
    if (params.num_sites() > 13) throw std::invalid_argument("state space too large for the exact generator");
    const int m = params.num_sites(), n = params.half_width;
    const int states = 1 << m;
    const double ex = params.exchange_rate();
    const double br = params.reservoir_event_rate();

    GeneratorMatrix g;
    g.num_states = states;
    g.jumps.resize(static_cast<std::size_t>(states));
    g.exit_rate.assign(static_cast<std::size_t>(states), 0.0);

    for (std::uint32_t s = 0; s < static_cast<std::uint32_t>(states); ++s) {
        auto& row = g.jumps[s];
        for (int b = 0; b < m - 1; ++b) {
            const std::uint32_t bit_a = 1u << b, bit_b = 1u << (b + 1);
            const bool oa = s & bit_a, ob = s & bit_b;
            if (oa != ob) row.emplace_back(s ^ bit_a ^ bit_b, ex);
        }
        if (params.reservoir_rate > 0.0) {
            // birth at the largest empty site of I+, death at the smallest
            // occupied site of I-; at most one of each per configuration
            for (int x = n; x >= n - params.reservoir_width + 1; --x) {
                const std::uint32_t bit = 1u << params.index_of(x);
                if (!(s & bit)) {
                    row.emplace_back(s | bit, br);
                    break;
                }
            }
            for (int x = -n; x <= -n + params.reservoir_width - 1; ++x) {
                const std::uint32_t bit = 1u << params.index_of(x);
                if (s & bit) {
                    row.emplace_back(s & ~bit, br);
                    break;
                }
            }
        }
        double out = 0.0;
        for (auto& [to, rate] : row) out += rate;
        g.exit_rate[s] = out;
    }
    return g;
}

/// Exact law at time t by uniformization with adaptive Poisson truncation:
/// the Poisson tail mass is kept below `tail_tol` in total variation.
inline LawVector evolve_law(const GeneratorMatrix& g, const LawVector& initial, double t, double tail_tol = 1e-12) {
    if (t < 0.0) throw std::invalid_argument("evolve_law needs t >= 0");
    if (static_cast<int>(initial.p.size()) != g.num_states) throw std::invalid_argument("law size mismatch");
    if (t == 0.0) return initial;

    double lam = 0.0;
    for (double r : g.exit_rate) lam = std::max(lam, r);
    if (lam == 0.0) return initial;
    lam *= 1.01;
    const double a = lam * t;

    // one step of the uniformized chain: w -> w P,  P = I + Q/lam
    auto dtmc_step = [&](const std::vector<double>& w, std::vector<double>& out) {
        for (std::size_t s = 0; s < w.size(); ++s)
            out[s] = w[s] * (1.0 - g.exit_rate[s] / lam);
        for (std::size_t s = 0; s < w.size(); ++s) {
            const double ws = w[s];
            if (ws == 0.0) continue;
            for (auto& [to, rate] : g.jumps[s]) out[to] += ws * rate / lam;
        }
    };

    std::vector<double> w = initial.p, buf(w.size());
    std::vector<double> acc(w.size(), 0.0);

    // Poisson(a) weights by upward recursion in log space
    double log_pk = -a; // log P[k=0]
    double cum = 0.0;
    for (int k = 0;; ++k) {
        if (k > 0) {
            log_pk += std::log(a / k);
            dtmc_step(w, buf);
            w.swap(buf);
        }
        const double pk = std::exp(log_pk);
        if (pk > 0.0) {
            for (std::size_t s = 0; s < w.size(); ++s) acc[s] += pk * w[s];
            cum += pk;
        }
        if (1.0 - cum < tail_tol && k > a) break;
        if (k > 1000000) throw std::runtime_error("uniformization failed to converge");
    }
    // fold the truncated tail back proportionally so the output stays stochastic
    const double rest = 1.0 - cum;
    for (std::size_t s = 0; s < w.size(); ++s) acc[s] += rest * w[s];
    return LawVector{std::move(acc)};
}

inline DensityProfile marginal_expectations(const LawVector& law, const ModelParams& params) {
    DensityProfile out(params.half_width);
    for (std::size_t s = 0; s < law.p.size(); ++s) {
        const double w = law.p[s];
        if (w == 0.0) continue;
        for (int i = 0; i < params.num_sites(); ++i)
            if (s >> i & 1u) out.values[static_cast<std::size_t>(i)] += w;
    }
    return out;
}

/// E[ prod_i (eta(x_i) - reference(x_i)) ] under the law; sites must be distinct.
inline double centered_product_moment(const LawVector& law, const ModelParams& params,
                                      const DensityProfile& reference, const std::vector<int>& sites) {
    for (std::size_t i = 0; i < sites.size(); ++i)
        for (std::size_t k = i + 1; k < sites.size(); ++k)
            if (sites[i] == sites[k]) throw std::invalid_argument("sites must be distinct");
    double out = 0.0;
    for (std::size_t s = 0; s < law.p.size(); ++s) {
        const double w = law.p[s];
        if (w == 0.0) continue;
        double prod = w;
        for (int x : sites) prod *= (s >> params.index_of(x) & 1u) - reference.at(x);
        out += prod;
    }
    return out;
}

/// Product law with per-site occupation probabilities from a profile.
inline LawVector product_law(const ModelParams& params, const DensityProfile& profile) {
    const int m = params.num_sites();
    LawVector law;
    law.p.assign(1ull << m, 0.0);
    for (std::size_t s = 0; s < law.p.size(); ++s) {
        double w = 1.0;
        for (int i = 0; i < m; ++i) {
            const double q = profile.values[static_cast<std::size_t>(i)];
            w *= (s >> i & 1u) ? q : 1.0 - q;
        }
        law.p[s] = w;
    }
    return law;
}

/// Debug dump, column order: state index, value.
inline void dump_law_csv(const LawVector& law, const std::string& path) {
    std::ofstream out(path);
    out << "state,probability\n";
    for (std::size_t s = 0; s < law.p.size(); ++s) out << s << "," << law.p[s] << "\n";
}

} // namespace sepr
