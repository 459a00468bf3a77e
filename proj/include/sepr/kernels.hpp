#pragma once

// Transition kernels:
//   - free_walk: continuous-time simple random walk on Z (modified Bessel row),
//   - reflected_walk: the walk on [-N, N] with suppressed outside jumps,
//     evaluated by folding the free walk (method of images) or spectrally,
//   - continuum Gaussian and Neumann (reflecting) kernels on [-1, 1],
//   - the boundary kernels p, q and the free boundary traces w+-,
//   - the half-line walk kernel and the time-integrated flux weights a(h).

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

#include "model.hpp"
#include "quad.hpp"

namespace sepr {

// ---------------------------------------------------------------------------
// Free walk on Z.
// ---------------------------------------------------------------------------

/// One row of transition probabilities of the symmetric continuous-time walk
/// on Z with total jump rate lambda:  prob(d) = e^{-a} I_|d|(a), a = lambda*t.
/// Backward (Miller) recurrence with sum normalization; plain series when
/// a < 1.  prob(0) + 2*sum_{d>=1} prob(d) = 1 up to the truncation tail.
class WalkKernelRow {
  public:
    WalkKernelRow(double a, int dmax) : a_(a) {
        if (a < 0.0) throw std::invalid_argument("walk kernel needs a >= 0");
        if (dmax < 0) dmax = 0;
        p_.assign(static_cast<std::size_t>(dmax) + 1, 0.0);
        if (a == 0.0) {
            p_[0] = 1.0;
            return;
        }
        if (a < 1.0)
            fill_series(a, dmax);
        else
            fill_miller(a, dmax);
    }

    double prob(long long d) const {
        std::size_t ad = static_cast<std::size_t>(d < 0 ? -d : d);
        return ad < p_.size() ? p_[ad] : 0.0;
    }
    int dmax() const { return static_cast<int>(p_.size()) - 1; }
    double a() const { return a_; }

    /// Total mass prob(0) + 2*sum_{d=1..dmax} prob(d) (1 minus the tail).
    double total_mass() const {
        double s = 0.0, c = 0.0;
        for (std::size_t d = p_.size(); d-- > 1;) kahan_add(s, c, 2.0 * p_[d]);
        kahan_add(s, c, p_[0]);
        return s;
    }

  private:
    static void kahan_add(double& s, double& c, double x) {
        double y = x - c;
        double t = s + y;
        c = (t - s) - y;
        s = t;
    }

    void fill_series(double a, int dmax) {
        const double ea = std::exp(-a), half = 0.5 * a;
        for (int d = 0; d <= dmax; ++d) {
            double term = 1.0;
            for (int i = 1; i <= d; ++i) term *= half / i;
            double sum = term;
            for (int m = 1; m < 200 && term > 1e-20 * sum; ++m) {
                term *= half * half / (static_cast<double>(m) * (d + m));
                sum += term;
            }
            p_[static_cast<std::size_t>(d)] = ea * sum;
            if (sum == 0.0) break; // underflow; remaining entries are 0
        }
    }

    void fill_miller(double a, int dmax) {
        const int start = dmax + static_cast<int>(a + 12.0 * std::sqrt(a)) + 40;
        std::vector<double> v(static_cast<std::size_t>(start) + 2, 0.0);
        v[static_cast<std::size_t>(start) + 1] = 0.0;
        v[static_cast<std::size_t>(start)] = 1e-280;
        for (int k = start; k >= 1; --k) {
            double next = v[static_cast<std::size_t>(k) + 1] + (2.0 * k / a) * v[static_cast<std::size_t>(k)];
            if (next > 1e270) { // rescale to avoid overflow; tail entries flush toward 0
                for (std::size_t i = static_cast<std::size_t>(k); i < v.size(); ++i) v[i] *= 1e-280;
                next = v[static_cast<std::size_t>(k) + 1] + (2.0 * k / a) * v[static_cast<std::size_t>(k)];
            }
            v[static_cast<std::size_t>(k) - 1] = next;
        }
        double s = 0.0, c = 0.0;
        for (std::size_t k = v.size(); k-- > 1;) kahan_add(s, c, 2.0 * v[k]);
        kahan_add(s, c, v[0]);
        for (std::size_t d = 0; d < p_.size(); ++d) p_[d] = v[d] / s;
    }

    double a_;
    std::vector<double> p_;
};

/// Transition probability of the free walk with jump rate eps^{-2}/2 to each
/// neighbor (total rate eps^{-2}); depends on sites through dx only.
inline double free_walk_prob(double t, long long dx, double epsilon) {
    if (t < 0.0) throw std::invalid_argument("free walk needs t >= 0");
    const double a = t / (epsilon * epsilon);
    WalkKernelRow row(a, static_cast<int>(std::llabs(dx)));
    return row.prob(dx);
}

// ---------------------------------------------------------------------------
// Reflected walk on [-N, N] by images.
// ---------------------------------------------------------------------------

/// Image truncation radius for tail mass below `tol`.
inline long long image_radius(double a, int n, double tol = 1e-15) {
    return static_cast<long long>(std::sqrt(2.0 * a * std::log(1.0 / tol))) + 4LL * n + 2;
}

/// Kernel of the reflected walk at one time, built once per t and evaluated
/// by folding the free-walk row over the preimages of the target site.
class ReflectedWalk {
  public:
    ReflectedWalk(double t, const ModelParams& p)
        : params_(p), a_(t / (p.epsilon * p.epsilon)), radius_(image_radius(a_, p.half_width)),
          row_(a_, static_cast<int>(radius_) + 2 * p.half_width) {}

    double prob(int x, int y) const {
        const int n = params_.half_width;
        double s = 0.0;
        for (long long z : fold_preimages(y, n, x - radius_, x + radius_)) s += row_.prob(x - z);
        return s;
    }

    std::vector<double> matrix() const {
        const int m = params_.num_sites(), n = params_.half_width;
        std::vector<double> out(static_cast<std::size_t>(m) * m);
        for (int y = -n; y <= n; ++y) {
            auto pre = fold_preimages(y, n, -n - radius_, n + radius_);
            for (int x = -n; x <= n; ++x) {
                double s = 0.0;
                for (long long z : pre)
                    if (std::llabs(x - z) <= radius_) s += row_.prob(x - z);
                out[static_cast<std::size_t>(params_.index_of(x)) * m + params_.index_of(y)] = s;
            }
        }
        return out;
    }

  private:
    ModelParams params_;
    double a_;
    long long radius_;
    WalkKernelRow row_;
};

inline double reflected_walk_prob(double t, int x, int y, const ModelParams& p) {
    if (t < 0.0) throw std::invalid_argument("reflected walk needs t >= 0");
    if (!p.in_lattice(x) || !p.in_lattice(y)) throw std::invalid_argument("site outside lattice");
    return ReflectedWalk(t, p).prob(x, y);
}

// ---------------------------------------------------------------------------
// Reflected walk, spectral form.
// ---------------------------------------------------------------------------

/// Eigendecomposition of -(1/2) Delta_eps on the path graph: the reflecting
/// Laplacian has the cosine basis phi_k(i) ~ cos(pi k (2i+1) / (2m)) with
/// rates 2 eps^{-2} sin^2(pi k / (2m)).  Exact semigroup evaluations and the
/// closed-form time moments used by the Volterra solver both come from here.
class SpectralHeat {
  public:
    explicit SpectralHeat(const ModelParams& p) : params_(p), m_(p.num_sites()) {
        const double scale = 1.0 / (p.epsilon * p.epsilon);
        rate_.resize(static_cast<std::size_t>(m_));
        basis_.resize(static_cast<std::size_t>(m_) * m_);
        for (int k = 0; k < m_; ++k) {
            const double s = std::sin(0.5 * M_PI * k / m_);
            rate_[static_cast<std::size_t>(k)] = 2.0 * scale * s * s;
            const double norm = k == 0 ? std::sqrt(1.0 / m_) : std::sqrt(2.0 / m_);
            for (int i = 0; i < m_; ++i)
                basis_[static_cast<std::size_t>(k) * m_ + i] = norm * std::cos(M_PI * k * (2.0 * i + 1.0) / (2.0 * m_));
        }
    }

    int num_sites() const { return m_; }
    const std::vector<double>& rates() const { return rate_; }
    double basis(int k, int site) const {
        return basis_[static_cast<std::size_t>(k) * m_ + params_.index_of(site)];
    }

    double kernel(double t, int x, int y) const {
        const int ix = params_.index_of(x), iy = params_.index_of(y);
        double s = 0.0;
        for (int k = m_ - 1; k >= 0; --k) {
            const double e = std::exp(-rate_[static_cast<std::size_t>(k)] * t);
            if (e == 0.0) continue;
            s += e * basis_[static_cast<std::size_t>(k) * m_ + ix] * basis_[static_cast<std::size_t>(k) * m_ + iy];
        }
        return s;
    }

    std::vector<double> to_modes(const std::vector<double>& site_values) const {
        std::vector<double> out(static_cast<std::size_t>(m_), 0.0);
        for (int k = 0; k < m_; ++k) {
            double s = 0.0;
            for (int i = 0; i < m_; ++i) s += basis_[static_cast<std::size_t>(k) * m_ + i] * site_values[static_cast<std::size_t>(i)];
            out[static_cast<std::size_t>(k)] = s;
        }
        return out;
    }

    std::vector<double> from_modes(const std::vector<double>& modes) const {
        std::vector<double> out(static_cast<std::size_t>(m_), 0.0);
        for (int k = 0; k < m_; ++k) {
            const double c = modes[static_cast<std::size_t>(k)];
            if (c == 0.0) continue;
            for (int i = 0; i < m_; ++i) out[static_cast<std::size_t>(i)] += c * basis_[static_cast<std::size_t>(k) * m_ + i];
        }
        return out;
    }

    /// e^{t (1/2) Delta_eps} applied to site values.
    std::vector<double> propagate(double t, const std::vector<double>& site_values) const {
        auto modes = to_modes(site_values);
        for (int k = 0; k < m_; ++k) modes[static_cast<std::size_t>(k)] *= std::exp(-rate_[static_cast<std::size_t>(k)] * t);
        return from_modes(modes);
    }

  private:
    ModelParams params_;
    int m_;
    std::vector<double> rate_;
    std::vector<double> basis_;
};

// ---------------------------------------------------------------------------
// Continuum kernels on [-1, 1].
// ---------------------------------------------------------------------------

inline double gauss_kernel(double t, double r, double rp) {
    if (t <= 0.0) throw std::domain_error("gauss kernel needs t > 0");
    const double d = r - rp;
    return std::exp(-d * d / (2.0 * t)) / std::sqrt(2.0 * M_PI * t);
}

/// Neumann heat kernel on [-1, 1] by images under the fold map; the image
/// families of an interior target are rp + 4k and 2 - rp + 4k, and they
/// coincide at rp = +-1 where the kernel carries the doubled single family.
inline double neumann_kernel(double t, double r, double rp) {
    if (t <= 0.0) throw std::domain_error("neumann kernel needs t > 0");
    if (r < -1.0 || r > 1.0 || rp < -1.0 || rp > 1.0) throw std::invalid_argument("neumann kernel needs r, rp in [-1,1]");
    const double radius = std::sqrt(2.0 * t * std::log(1e16)) + 8.0;
    double s = 0.0;
    const bool boundary = rp == 1.0 || rp == -1.0;
    const double factor = boundary ? 2.0 : 1.0;
    for (long long k = static_cast<long long>(std::floor((r - radius - rp) / 4.0)); 4.0 * k + rp <= r + radius; ++k)
        s += factor * gauss_kernel(t, r, rp + 4.0 * k);
    if (!boundary)
        for (long long k = static_cast<long long>(std::floor((r - radius - (2.0 - rp)) / 4.0)); 4.0 * k + 2.0 - rp <= r + radius; ++k)
            s += gauss_kernel(t, r, 2.0 - rp + 4.0 * k);
    return s;
}

struct BoundaryKernels {
    double same;  // p(t) = 2 sum_k G_t(4k)  = P_t(1, 1)
    double cross; // q(t) = 2 sum_k G_t(4k+2) = P_t(1, -1)
};

inline BoundaryKernels boundary_kernels(double t) {
    if (t <= 0.0) throw std::domain_error("boundary kernels need t > 0");
    const double radius = std::sqrt(2.0 * t * std::log(1e18)) + 8.0;
    BoundaryKernels out{0.0, 0.0};
    for (long long k = static_cast<long long>(-std::ceil(radius / 4.0)) - 1; 4.0 * k <= radius + 2.0; ++k) {
        out.same += 2.0 * gauss_kernel(t, 0.0, 4.0 * static_cast<double>(k));
        out.cross += 2.0 * gauss_kernel(t, 0.0, 4.0 * static_cast<double>(k) + 2.0);
    }
    return out;
}

/// Initial datum for the macroscopic problem: a bounded [0,1]-valued
/// function on [-1,1] with optional quadrature breakpoints (e.g. a step).
/// Constant data is tagged so conserved quantities short-circuit exactly.
struct MacroProfile {
    std::function<double(double)> f;
    std::vector<double> breakpoints;
    bool is_constant = false;

    double operator()(double r) const { return f(r); }

    static MacroProfile constant(double c) { return {[c](double) { return c; }, {}, true}; }
    static MacroProfile linear(double a, double b) {
        return {[a, b](double r) { return a + b * r; }, {}, false};
    }
    static MacroProfile step(double lo, double hi, double r0 = 0.0) {
        return {[lo, hi, r0](double r) { return r < r0 ? lo : hi; }, {r0}, false};
    }
};

/// Free boundary traces w_{+-,t}: the Neumann evolution of the initial datum
/// evaluated at the boundary, as the image-series integrals
/// w_{+,t} = sum_k int u0(r') 2 G_t(1 - r' + 4k) dr'  (and mirrored at -1).
/// The boundary point's image families coincide, hence the single doubled sum.
inline double free_boundary_trace(double t, const MacroProfile& u0, bool plus_side, double tol = 1e-12) {
    if (t <= 0.0) throw std::domain_error("free boundary trace needs t > 0");
    const double b = plus_side ? 1.0 : -1.0;
    const double radius = std::sqrt(2.0 * t * std::log(1.0 / tol)) + 8.0;
    double s = 0.0;
    const long long k_lo = static_cast<long long>(std::floor((-1.0 - radius - b) / 4.0));
    for (long long k = k_lo; b + 4.0 * static_cast<double>(k) <= 1.0 + radius; ++k) {
        const double img = b + 4.0 * static_cast<double>(k);
        s += integrate_adaptive_split(
            [&](double rp) { return u0(rp) * 2.0 * gauss_kernel(t, img, rp); },
            -1.0, 1.0, u0.breakpoints, tol);
    }
    return s;
}

// ---------------------------------------------------------------------------
// Half-line walk and the flux weights a(h).
// ---------------------------------------------------------------------------

/// Reflected-at-origin walk on Z+ with jump intensity 1/2 per neighbor:
/// p_t(x, y) = q_t(x - y) + q_t(x + y + 1), q the free rate-1 walk.
inline double halfline_walk_prob(double t, int x, int y) {
    if (t < 0.0 || x < 0 || y < 0) throw std::invalid_argument("halfline walk needs t, x, y >= 0");
    WalkKernelRow row(t, x + y + 1);
    return row.prob(x - y) + row.prob(x + y + 1);
}

struct FluxWeights {
    std::vector<double> a;   // a(h), h = 0..K-1
    std::vector<double> err; // estimated integration error per entry
};

/// a(h) = int_0^inf (p_t(K,h) - p_t(K+1,h)) dt, integrated on geometric
/// segments up to t_max, plus the fitted c/t^{3/2} tail beyond t_max.
inline FluxWeights reservoir_flux_weights(int k_width, double t_max = 0.0, double tol = 1e-6) {
    if (k_width < 1) throw std::invalid_argument("flux weights need K >= 1");
    if (t_max <= 0.0) t_max = 1e4 * static_cast<double>(k_width) * k_width;
    const int dmax = 2 * k_width + 2;
    auto integrand = [&](double t, std::vector<double>& out) {
        WalkKernelRow row(t, dmax);
        for (int h = 0; h < k_width; ++h)
            out[static_cast<std::size_t>(h)] = row.prob(k_width - h) + row.prob(k_width + h + 1) -
                                               row.prob(k_width + 1 - h) - row.prob(k_width + h + 2);
    };

    FluxWeights w;
    w.a.assign(static_cast<std::size_t>(k_width), 0.0);
    w.err.assign(static_cast<std::size_t>(k_width), 0.0);
    std::vector<double> vals(static_cast<std::size_t>(k_width));

    const GaussRule& rule = gauss_rule(24);
    double lo = 0.0, hi = 1.0;
    while (lo < t_max) {
        if (hi > t_max) hi = t_max;
        const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
        for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
            integrand(mid + half * rule.nodes[i], vals);
            for (int h = 0; h < k_width; ++h) w.a[static_cast<std::size_t>(h)] += half * rule.weights[i] * vals[static_cast<std::size_t>(h)];
        }
        lo = hi;
        hi *= 2.0;
    }

    // fitted algebraic tail: integrand ~ c/t^{3/2} for t >> K^2; the achieved
    // error is reported whether or not it meets the requested tolerance
    integrand(t_max, vals);
    for (int h = 0; h < k_width; ++h) {
        const double c = vals[static_cast<std::size_t>(h)] * std::pow(t_max, 1.5);
        const double tail = 2.0 * c / std::sqrt(t_max);
        w.a[static_cast<std::size_t>(h)] += tail;
        w.err[static_cast<std::size_t>(h)] = 0.25 * std::abs(tail) + 1e-10;
    }
    (void)tol;
    return w;
}

} // namespace sepr
