#pragma once

// Exact continuous-time Monte Carlo for the reservoir-driven exclusion
// process (Gillespie direct method).  Candidate events: exchange across each
// discordant bond at rate eps^{-2}/2, one birth filling the topmost empty
// site of I+ and one death emptying the bottommost occupied site of I-,
// each at rate eps^{-1} j/2 while legal.  Per-event cost is O(1) through a
// swap-removable discordant-bond index set.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <thread>
#include <vector>

#include "model.hpp"
#include "rng.hpp"

namespace sepr {

enum class EventKind { exchange, birth, death, absorbed };

struct StepResult {
    EventKind kind;
    double waiting_time;
    int site; // bond left site for exchanges, flipped site for births/deaths
};

struct EventRates {
    double exchange_per_bond;
    double birth;
    double death;
};

inline EventRates event_rates(const ModelParams& p, const Configuration& c) {
    return EventRates{p.exchange_rate(),
                      c.top_empty_plus == Configuration::no_site ? 0.0 : p.reservoir_event_rate(),
                      c.bottom_occupied_minus == Configuration::no_site ? 0.0 : p.reservoir_event_rate()};
}

inline int count_discordant_bonds(const Configuration& c) {
    int n = 0;
    for (std::size_t i = 0; i + 1 < c.occ.size(); ++i) n += c.occ[i] != c.occ[i + 1];
    return n;
}

inline double total_event_rate(const ModelParams& p, const Configuration& c) {
    const EventRates r = event_rates(p, c);
    return count_discordant_bonds(c) * r.exchange_per_bond + r.birth + r.death;
}

inline Configuration sample_product_measure(const ModelParams& p, const DensityProfile& profile, Rng& rng) {
    Configuration c(p);
    for (int i = 0; i < p.num_sites(); ++i) c.occ[static_cast<std::size_t>(i)] = rng.bernoulli(profile.values[static_cast<std::size_t>(i)]) ? 1 : 0;
    c.rebuild_caches();
    return c;
}

namespace detail {

/// Discordant-bond index set with O(1) insert/remove and uniform sampling.
class BondSet {
  public:
    explicit BondSet(int num_bonds) : pos_(static_cast<std::size_t>(num_bonds), -1) {}

    void sync(const Configuration& c) {
        for (auto& p : pos_) p = -1;
        list_.clear();
        for (int b = 0; b < static_cast<int>(pos_.size()); ++b)
            if (c.occ[static_cast<std::size_t>(b)] != c.occ[static_cast<std::size_t>(b) + 1]) insert(b);
    }

    void refresh(int bond, const Configuration& c) { refresh_raw(bond, c.occ.data()); }

    void refresh_raw(int bond, const std::uint8_t* occ) {
        const bool disc = occ[bond] != occ[bond + 1];
        const int p = pos_[static_cast<std::size_t>(bond)];
        if (disc && p < 0) insert(bond);
        else if (!disc && p >= 0) remove(bond);
    }

    int size() const { return static_cast<int>(list_.size()); }
    int nth(int i) const { return list_[static_cast<std::size_t>(i)]; }

  private:
    void insert(int bond) {
        pos_[static_cast<std::size_t>(bond)] = static_cast<int>(list_.size());
        list_.push_back(bond);
    }
    void remove(int bond) {
        const int p = pos_[static_cast<std::size_t>(bond)];
        const int last = list_.back();
        list_[static_cast<std::size_t>(p)] = last;
        pos_[static_cast<std::size_t>(last)] = p;
        list_.pop_back();
        pos_[static_cast<std::size_t>(bond)] = -1;
    }
    std::vector<int> pos_;
    std::vector<int> list_;
};

} // namespace detail

/// Sample the next event of the chain exactly and apply it in place.
/// Returns an absorbed marker with infinite waiting time when no event is
/// active (possible only for j = 0 with a constant configuration).
inline StepResult step(const ModelParams& p, Configuration& c, Rng& rng) {
    const EventRates r = event_rates(p, c);
    const int n_disc = count_discordant_bonds(c);
    const double ex_total = n_disc * r.exchange_per_bond;
    const double total = ex_total + r.birth + r.death;
    if (total <= 0.0) return {EventKind::absorbed, std::numeric_limits<double>::infinity(), 0};

    const double wait = rng.exponential(total);
    double u = rng.uniform() * total;
    if (u < ex_total) {
        int idx = std::min(static_cast<int>(u / r.exchange_per_bond), n_disc - 1);
        for (int b = 0; b + 1 < static_cast<int>(c.occ.size()); ++b) {
            if (c.occ[static_cast<std::size_t>(b)] != c.occ[static_cast<std::size_t>(b) + 1] && idx-- == 0) {
                const int site = b - p.half_width;
                c.exchange(site);
                return {EventKind::exchange, wait, site};
            }
        }
    }
    if (u < ex_total + r.birth || r.death == 0.0) {
        const int site = c.top_empty_plus;
        c.set(site, true);
        return {EventKind::birth, wait, site};
    }
    const int site = c.bottom_occupied_minus;
    c.set(site, false);
    return {EventKind::death, wait, site};
}

struct SimulateOptions {
    std::vector<double> observation_times; // sorted, nonnegative
    std::vector<int> tracked_bonds;        // bond x stands for (x, x+1)
    bool paranoid = false;                 // validate caches and event legality per event
};

/// Snapshots (bit-packed occupancies) and cumulative event counters at each
/// observation time, for one trajectory.
struct ReplicaRecord {
    int words_per_snapshot = 0;
    std::vector<std::uint64_t> snapshots; // observation-major
    std::vector<std::int64_t> births;     // cumulative, per observation time
    std::vector<std::int64_t> deaths;
    std::vector<std::int64_t> crossings;  // observation-major, per tracked bond
    std::uint64_t event_count = 0;

    bool occupied(int obs, int word_index_bit) const {
        return snapshots[static_cast<std::size_t>(obs) * words_per_snapshot + static_cast<std::size_t>(word_index_bit >> 6)] >>
                   (word_index_bit & 63) & 1ull;
    }
};

inline ReplicaRecord simulate(const ModelParams& p, Configuration config, const SimulateOptions& opt, Rng& rng) {
    for (std::size_t i = 0; i + 1 < opt.observation_times.size(); ++i)
        if (opt.observation_times[i] > opt.observation_times[i + 1]) throw std::invalid_argument("observation times must be sorted");
    if (!opt.observation_times.empty() && opt.observation_times.front() < 0.0)
        throw std::invalid_argument("observation times must be nonnegative");

    const int m = p.num_sites();
    const int num_bonds = m - 1;
    const int k_width = p.reservoir_width;
    const int words = (m + 63) / 64;
    const std::size_t n_obs = opt.observation_times.size();

    ReplicaRecord rec;
    rec.words_per_snapshot = words;
    rec.snapshots.assign(n_obs * static_cast<std::size_t>(words), 0);
    rec.births.assign(n_obs, 0);
    rec.deaths.assign(n_obs, 0);
    rec.crossings.assign(n_obs * opt.tracked_bonds.size(), 0);

    std::vector<int> track_slot(static_cast<std::size_t>(num_bonds), -1);
    for (std::size_t s = 0; s < opt.tracked_bonds.size(); ++s) {
        const int b = opt.tracked_bonds[s];
        if (b < -p.half_width || b >= p.half_width) throw std::invalid_argument("tracked bond outside lattice");
        track_slot[static_cast<std::size_t>(b + p.half_width)] = static_cast<int>(s);
    }
    std::vector<std::int64_t> crossing_now(opt.tracked_bonds.size(), 0);
    std::int64_t births_now = 0, deaths_now = 0;

    // hot-loop state: raw occupancies (array index = site + N) plus the
    // active-site caches maintained in locals
    std::uint8_t* const occ = config.occ.data();
    detail::BondSet bonds(num_bonds);
    bonds.sync(config);
    int top_empty = config.top_empty_plus;        // array index, or -1
    int bottom_occ = config.bottom_occupied_minus; // array index, or -1
    top_empty = top_empty == Configuration::no_site ? -1 : top_empty + p.half_width;
    bottom_occ = bottom_occ == Configuration::no_site ? -1 : bottom_occ + p.half_width;

    auto rescan_plus = [&]() {
        top_empty = -1;
        for (int i = m - 1; i >= m - k_width; --i)
            if (!occ[i]) { top_empty = i; break; }
    };
    auto rescan_minus = [&]() {
        bottom_occ = -1;
        for (int i = 0; i <= k_width - 1; ++i)
            if (occ[i]) { bottom_occ = i; break; }
    };

    const double ex_rate = p.exchange_rate();
    const double inv_ex_rate = 1.0 / ex_rate;
    const double res_rate = p.reservoir_event_rate();

    auto record = [&](std::size_t obs) {
        std::uint64_t* snap = rec.snapshots.data() + obs * static_cast<std::size_t>(words);
        for (int i = 0; i < m; ++i)
            if (occ[i]) snap[i >> 6] |= 1ull << (i & 63);
        rec.births[obs] = births_now;
        rec.deaths[obs] = deaths_now;
        for (std::size_t s = 0; s < crossing_now.size(); ++s) rec.crossings[obs * crossing_now.size() + s] = crossing_now[s];
    };
    auto validate = [&]() {
        config.rebuild_caches();
        const int te = config.top_empty_plus == Configuration::no_site ? -1 : config.top_empty_plus + p.half_width;
        const int bo = config.bottom_occupied_minus == Configuration::no_site ? -1 : config.bottom_occupied_minus + p.half_width;
        if (te != top_empty || bo != bottom_occ) throw std::logic_error("configuration caches out of sync");
    };

    double t = 0.0;
    std::size_t next_obs = 0;
    while (next_obs < n_obs) {
        const double birth_rate = top_empty < 0 ? 0.0 : res_rate;
        const double death_rate = bottom_occ < 0 ? 0.0 : res_rate;
        const double ex_total = bonds.size() * ex_rate;
        const double total = ex_total + birth_rate + death_rate;

        if (total <= 0.0) {
            while (next_obs < n_obs) record(next_obs++);
            break;
        }

        const double t_next = t + rng.exponential(total);
        if (opt.observation_times[next_obs] <= t_next) {
            while (next_obs < n_obs && opt.observation_times[next_obs] <= t_next) record(next_obs++);
            if (next_obs >= n_obs) break;
        }
        t = t_next;
        ++rec.event_count;

        const double u = rng.uniform() * total;
        if (u < ex_total) {
            int idx = static_cast<int>(u * inv_ex_rate);
            if (idx >= bonds.size()) idx = bonds.size() - 1;
            const int bond = bonds.nth(idx);
            const bool rightward = occ[bond] != 0;
            std::swap(occ[bond], occ[bond + 1]);
            if (bond > 0) bonds.refresh_raw(bond - 1, occ);
            if (bond + 1 < num_bonds) bonds.refresh_raw(bond + 1, occ);
            if (bond < k_width) rescan_minus();
            else if (bond >= num_bonds - k_width) rescan_plus();
            const int slot = track_slot[static_cast<std::size_t>(bond)];
            if (slot >= 0) crossing_now[static_cast<std::size_t>(slot)] += rightward ? 1 : -1;
        } else if (u < ex_total + birth_rate) {
            const int i = top_empty;
            if (opt.paranoid) {
                if (occ[i]) throw std::logic_error("birth at occupied site");
                for (int y = i + 1; y < m; ++y)
                    if (!occ[y]) throw std::logic_error("birth below an empty site");
            }
            occ[i] = 1;
            if (i > 0) bonds.refresh_raw(i - 1, occ);
            if (i < num_bonds) bonds.refresh_raw(i, occ);
            rescan_plus();
            ++births_now;
        } else {
            const int i = bottom_occ;
            if (opt.paranoid) {
                if (!occ[i]) throw std::logic_error("death at empty site");
                for (int y = 0; y < i; ++y)
                    if (occ[y]) throw std::logic_error("death above an occupied site");
            }
            occ[i] = 0;
            if (i > 0) bonds.refresh_raw(i - 1, occ);
            if (i < num_bonds) bonds.refresh_raw(i, occ);
            rescan_minus();
            ++deaths_now;
        }
        if (opt.paranoid) validate();
    }
    return rec;
}

// ---------------------------------------------------------------------------
// Ensembles.
// ---------------------------------------------------------------------------

struct EnsembleOptions {
    int replicas = 0;
    std::uint64_t seed = 0;
    int threads = 0; // 0 = hardware concurrency
    std::vector<double> observation_times;
    std::vector<int> tracked_bonds;
    bool paranoid = false;
};

/// Immutable ensemble data: one record per replica, replica i drawn from the
/// stream (seed, i).  Identical (params, seed, options) give bit-identical
/// records for any thread count.
struct Ensemble {
    ModelParams params;
    EnsembleOptions options;
    DensityProfile initial_profile;
    std::vector<ReplicaRecord> records;

    int num_times() const { return static_cast<int>(options.observation_times.size()); }
    int bond_slot(int bond) const {
        for (std::size_t s = 0; s < options.tracked_bonds.size(); ++s)
            if (options.tracked_bonds[s] == bond) return static_cast<int>(s);
        return -1;
    }
};

inline Ensemble run_ensemble(const ModelParams& p, const DensityProfile& initial, const EnsembleOptions& opt) {
    if (opt.replicas < 2) throw std::invalid_argument("ensemble needs at least 2 replicas");
    for (double v : initial.values)
        if (v < 0.0 || v > 1.0) throw std::invalid_argument("initial profile must take values in [0,1]");

    Ensemble e;
    e.params = p;
    e.options = opt;
    e.initial_profile = initial;
    e.records.resize(static_cast<std::size_t>(opt.replicas));

    SimulateOptions sopt{opt.observation_times, opt.tracked_bonds, opt.paranoid};
    const int threads = opt.threads > 0 ? opt.threads : std::max(1u, std::thread::hardware_concurrency());

    std::atomic<int> cursor{0};
    auto worker = [&]() {
        constexpr int chunk = 16;
        for (;;) {
            const int begin = cursor.fetch_add(chunk);
            if (begin >= opt.replicas) break;
            const int end = std::min(begin + chunk, opt.replicas);
            for (int i = begin; i < end; ++i) {
                Rng rng = Rng::for_replica(opt.seed, static_cast<std::uint64_t>(i));
                Configuration c = sample_product_measure(p, initial, rng);
                e.records[static_cast<std::size_t>(i)] = simulate(p, std::move(c), sopt, rng);
            }
        }
    };

    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(threads));
        for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    return e;
}

struct EnsembleStats {
    std::vector<double> times;
    std::vector<DensityProfile> site_means;   // one profile per observation time
    std::vector<DensityProfile> site_stderrs; // matching standard errors
    int replica_count = 0;
    std::uint64_t seed = 0;
};

inline EnsembleStats ensemble_mean(const Ensemble& e) {
    const int m = e.params.num_sites();
    const int n_obs = e.num_times();
    const int reps = static_cast<int>(e.records.size());

    EnsembleStats st;
    st.times = e.options.observation_times;
    st.replica_count = reps;
    st.seed = e.options.seed;
    st.site_means.assign(static_cast<std::size_t>(n_obs), DensityProfile(e.params.half_width));
    st.site_stderrs.assign(static_cast<std::size_t>(n_obs), DensityProfile(e.params.half_width));

    for (int obs = 0; obs < n_obs; ++obs) {
        auto& mean = st.site_means[static_cast<std::size_t>(obs)];
        mean.time_label = st.times[static_cast<std::size_t>(obs)];
        for (const auto& rec : e.records)
            for (int i = 0; i < m; ++i) mean.values[static_cast<std::size_t>(i)] += rec.occupied(obs, i) ? 1.0 : 0.0;
        auto& err = st.site_stderrs[static_cast<std::size_t>(obs)];
        err.time_label = mean.time_label;
        for (int i = 0; i < m; ++i) {
            const double phat = mean.values[static_cast<std::size_t>(i)] / reps;
            mean.values[static_cast<std::size_t>(i)] = phat;
            err.values[static_cast<std::size_t>(i)] = std::sqrt(phat * (1.0 - phat) / std::max(1, reps - 1));
        }
    }
    return st;
}

/// Convenience wrapper: fresh product-measure sample per replica, then
/// per-site means/stderrs at the requested times.
inline EnsembleStats ensemble_mean(const ModelParams& p, const DensityProfile& initial,
                                   const std::vector<double>& observation_times, int replicas, std::uint64_t seed,
                                   int threads = 0) {
    EnsembleOptions opt;
    opt.replicas = replicas;
    opt.seed = seed;
    opt.threads = threads;
    opt.observation_times = observation_times;
    return ensemble_mean(run_ensemble(p, initial, opt));
}

} // namespace sepr
