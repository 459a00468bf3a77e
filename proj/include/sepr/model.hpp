#pragma once

// Lattice geometry, particle configurations, density profiles, and the
// elementary operators of the reservoir-driven exclusion model: the
// birth/death rate factors on the reservoir blocks, the reflecting discrete
// Laplacian, and the fold (reflection) maps used by the kernel machinery.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace sepr {

/// Model parameters: lattice [-N, N], reservoir blocks of width K at both
/// ends, reservoir rate parameter j, and the scale epsilon = 1/N.
struct ModelParams {
    int half_width = 0;        // N
    int reservoir_width = 0;   // K
    double reservoir_rate = 0; // j
    double epsilon = 0;        // 1/N

    ModelParams() = default;
    ModelParams(int n, int k, double j) : half_width(n), reservoir_width(k), reservoir_rate(j) {
        if (k < 1) throw std::invalid_argument("reservoir width must be >= 1");
        if (n < k) throw std::invalid_argument("reservoir blocks must not overlap (need N >= K)");
        if (j < 0.0) throw std::invalid_argument("reservoir rate must be >= 0");
        epsilon = 1.0 / static_cast<double>(n);
    }

    int num_sites() const { return 2 * half_width + 1; }
    int index_of(int site) const { return site + half_width; }
    int site_of(int index) const { return index - half_width; }

    bool in_lattice(int site) const { return site >= -half_width && site <= half_width; }
    // I+ = [N-K+1, N], I- = [-N, -N+K-1]
    bool in_plus_block(int site) const { return site >= half_width - reservoir_width + 1 && site <= half_width; }
    bool in_minus_block(int site) const { return site >= -half_width && site <= -half_width + reservoir_width - 1; }

    double exchange_rate() const { return 0.5 / (epsilon * epsilon); } // per discordant bond
    double reservoir_event_rate() const { return 0.5 * reservoir_rate / epsilon; }
};

/// A [0,1]-valued site function (density profile) with its macroscopic time.
struct DensityProfile {
    int half_width = 0;
    double time_label = 0.0;
    std::vector<double> values; // indexed by site + half_width

    DensityProfile() = default;
    DensityProfile(int n, double fill = 0.0, double t = 0.0)
        : half_width(n), time_label(t), values(2 * n + 1, fill) {}

    double& at(int site) { return values[static_cast<std::size_t>(site + half_width)]; }
    double at(int site) const { return values[static_cast<std::size_t>(site + half_width)]; }
    int num_sites() const { return static_cast<int>(values.size()); }

    bool in_unit_range(double slack = 0.0) const {
        for (double v : values)
            if (v < -slack || v > 1.0 + slack) return false;
        return true;
    }
};

/// One particle configuration plus O(1)-updatable caches of the unique
/// active birth site (largest empty site of I+) and active death site
/// (smallest occupied site of I-).  The caches must always agree with the
/// occupancy vector; validate_caches() recomputes them from scratch.
struct Configuration {
    static constexpr int no_site = INT32_MIN;

    ModelParams params;
    std::vector<std::uint8_t> occ; // indexed by site + half_width
    int top_empty_plus = no_site;
    int bottom_occupied_minus = no_site;

    Configuration() = default;
    explicit Configuration(const ModelParams& p) : params(p), occ(p.num_sites(), 0) { rebuild_caches(); }

    bool occupied(int site) const { return occ[static_cast<std::size_t>(site + params.half_width)] != 0; }

    void set(int site, bool value) {
        occ[static_cast<std::size_t>(site + params.half_width)] = value ? 1 : 0;
        notify_flip(site);
    }

    int particle_count() const {
        int c = 0;
        for (auto v : occ) c += v;
        return c;
    }

    /// Exchange the occupancies across bond (site, site+1).
    void exchange(int site) {
        auto i = static_cast<std::size_t>(site + params.half_width);
        std::swap(occ[i], occ[i + 1]);
        notify_flip(site);
        notify_flip(site + 1);
    }

    void rebuild_caches() {
        const int n = params.half_width, k = params.reservoir_width;
        top_empty_plus = no_site;
        for (int x = n; x >= n - k + 1; --x)
            if (!occupied(x)) { top_empty_plus = x; break; }
        bottom_occupied_minus = no_site;
        for (int x = -n; x <= -n + k - 1; ++x)
            if (occupied(x)) { bottom_occupied_minus = x; break; }
    }

    bool validate_caches() const {
        Configuration copy = *this;
        copy.rebuild_caches();
        return copy.top_empty_plus == top_empty_plus && copy.bottom_occupied_minus == bottom_occupied_minus;
    }

    std::uint64_t bitmask() const {
        if (params.num_sites() > 63) throw std::invalid_argument("bitmask requires at most 63 sites");
        std::uint64_t m = 0;
        for (int i = params.num_sites() - 1; i >= 0; --i) m = (m << 1) | occ[static_cast<std::size_t>(i)];
        return m;
    }

    static Configuration from_bitmask(const ModelParams& p, std::uint64_t mask) {
        Configuration c(p);
        for (int i = 0; i < p.num_sites(); ++i) c.occ[static_cast<std::size_t>(i)] = (mask >> i) & 1u;
        c.rebuild_caches();
        return c;
    }

  private:
    // Incremental cache maintenance after the occupancy at `site` changed.
    void notify_flip(int site) {
        const int n = params.half_width, k = params.reservoir_width;
        if (params.in_plus_block(site)) {
            if (!occupied(site)) {
                if (top_empty_plus == no_site || site > top_empty_plus) top_empty_plus = site;
            } else if (site == top_empty_plus) {
                top_empty_plus = no_site;
                for (int x = site - 1; x >= n - k + 1; --x)
                    if (!occupied(x)) { top_empty_plus = x; break; }
            }
        } else if (params.in_minus_block(site)) {
            if (occupied(site)) {
                if (bottom_occupied_minus == no_site || site < bottom_occupied_minus) bottom_occupied_minus = site;
            } else if (site == bottom_occupied_minus) {
                bottom_occupied_minus = no_site;
                for (int x = site + 1; x <= -n + k - 1; ++x)
                    if (occupied(x)) { bottom_occupied_minus = x; break; }
            }
        }
    }
};

// ---------------------------------------------------------------------------
// Birth/death rate factors.
// ---------------------------------------------------------------------------

/// (1-u(x)) * u(x+1) * ... * u(N), for x in I+.  Empty product at x = N.
template <class SiteFn>
double birth_factor_fn(const ModelParams& p, SiteFn&& u, int site) {
    if (!p.in_plus_block(site)) throw std::invalid_argument("birth factor defined on I+ only");
    double prod = 1.0 - u(site);
    for (int y = site + 1; y <= p.half_width; ++y) prod *= u(y);
    return prod;
}

/// u(x) * (1-u(x-1)) * ... * (1-u(-N)), for x in I-.  Empty product at x = -N.
template <class SiteFn>
double death_factor_fn(const ModelParams& p, SiteFn&& u, int site) {
    if (!p.in_minus_block(site)) throw std::invalid_argument("death factor defined on I- only");
    double prod = u(site);
    for (int y = site - 1; y >= -p.half_width; --y) prod *= 1.0 - u(y);
    return prod;
}

inline double birth_factor(const ModelParams& p, const DensityProfile& u, int site) {
    return birth_factor_fn(p, [&](int y) { return u.at(y); }, site);
}
inline double death_factor(const ModelParams& p, const DensityProfile& u, int site) {
    return death_factor_fn(p, [&](int y) { return u.at(y); }, site);
}
inline double birth_factor(const ModelParams& p, const Configuration& c, int site) {
    return birth_factor_fn(p, [&](int y) { return c.occupied(y) ? 1.0 : 0.0; }, site);
}
inline double death_factor(const ModelParams& p, const Configuration& c, int site) {
    return death_factor_fn(p, [&](int y) { return c.occupied(y) ? 1.0 : 0.0; }, site);
}

/// Discrete Laplacian on [-N, N] with reflecting ends:
/// interior u(x+1)+u(x-1)-2u(x), endpoints u(+-(N-1)) - u(+-N).
inline std::vector<double> reflecting_laplacian(const DensityProfile& u) {
    const int n = u.half_width;
    std::vector<double> out(u.values.size());
    for (int x = -n + 1; x <= n - 1; ++x)
        out[static_cast<std::size_t>(x + n)] = u.at(x + 1) + u.at(x - 1) - 2.0 * u.at(x);
    out.front() = u.at(-n + 1) - u.at(-n);
    out.back() = u.at(n - 1) - u.at(n);
    return out;
}

// ---------------------------------------------------------------------------
// Fold (reflection) maps.
// ---------------------------------------------------------------------------

/// Fold an integer onto [-N, N]: identity inside, odd extension below -N,
/// and the sawtooth folding with period 2(2N+1) above N.
inline int fold_site(long long z, int n) {
    const long long period = 4LL * n + 2;
    long long w = (z + n) % period;
    if (w < 0) w += period;
    return w <= 2 * n ? static_cast<int>(w - n) : static_cast<int>(3LL * n + 1 - w);
}

/// Continuum fold map onto [-1, 1]: identity on [-1,1], r -> 2-r on [1,3],
/// 4-periodic.
inline double fold_point(double r) {
    double z = std::fmod(r + 1.0, 4.0);
    if (z < 0.0) z += 4.0;
    return z <= 2.0 ? z - 1.0 : 3.0 - z;
}

/// N * fold_point(z / N), rounded to the lattice.  Used in kernel
/// cross-checks only; differs from fold_site by shifts.
inline int fold_site_scaled(long long z, int n) {
    return static_cast<int>(std::llround(n * fold_point(static_cast<double>(z) / n)));
}

/// Preimages of site y under fold_site within [lo, hi]: the two arithmetic
/// families y + m*(4N+2) and (2N+1-y) + m*(4N+2).  The families are disjoint
/// (parity), so no image is counted twice.
inline std::vector<long long> fold_preimages(int y, int n, long long lo, long long hi) {
    const long long period = 4LL * n + 2;
    std::vector<long long> out;
    for (long long base : {static_cast<long long>(y), 2LL * n + 1 - y}) {
        long long m0 = (lo - base) / period - 2;
        for (long long z = base + m0 * period; z <= hi; z += period)
            if (z >= lo) out.push_back(z);
    }
    return out;
}

} // namespace sepr
