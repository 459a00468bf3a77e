#pragma once

// Run configuration and subcommand dispatch.  The CLI executable parses
// flags/config files into a RunConfig and calls run(); keeping the dispatch
// here makes it testable in-process.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "diagnostics.hpp"
#include "evolution.hpp"
#include "io.hpp"
#include "kernels.hpp"
#include "kmc.hpp"
#include "macro.hpp"
#include "oracle.hpp"

namespace sepr {

struct RunConfig {
    std::string subcommand;

    int n = 50;
    int k = 1;
    double j = 1.0;
    std::string init = "const:0.5";
    double t_final = 0.5;
    std::vector<double> times; // observation/output times; defaults derived per subcommand

    int replicas = 1000;
    std::uint64_t seed = 12345;
    int threads = 0;

    double dt = 0.0;         // splitting step (0: eps^2/2)
    double h = 0.0;          // integral-form step (0: eps^2/4)
    double trace_step = 2e-3; // macro trace grid
    double window = 0.05;    // counting-estimator window
    std::vector<int> bonds{0};
    int r_points = 201;

    std::string scheme = "splitting"; // evolve: splitting | integral
    std::string kind = "hydro";       // study: hydro | moduli | delta
    std::vector<int> n_list{50, 100, 200};
    std::vector<double> delta_list{1e-3, 4e-3, 1.6e-2};
    bool dump_law = false;

    std::string out_dir = ".";
    std::string format = "csv";
};

namespace cli_detail {

inline MacroProfile parse_profile(const std::string& spec) {
    const auto colon = spec.find(':');
    const std::string kind = spec.substr(0, colon);
    std::vector<double> args;
    if (colon != std::string::npos) {
        std::stringstream ss(spec.substr(colon + 1));
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            if (kind == "table") break;
            args.push_back(std::stod(tok));
        }
    }
    if (kind == "const" && args.size() == 1) return MacroProfile::constant(args[0]);
    if (kind == "linear" && args.size() == 2) return MacroProfile::linear(args[0], args[1]);
    if (kind == "step" && (args.size() == 2 || args.size() == 3))
        return MacroProfile::step(args[0], args[1], args.size() == 3 ? args[2] : 0.0);
    if (kind == "table") {
        const std::string path = spec.substr(colon + 1);
        std::ifstream in(path);
        if (!in) throw std::invalid_argument("cannot open profile table " + path);
        std::vector<double> rs, vs;
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#' || line[0] == 'r') continue;
            const auto comma = line.find(',');
            rs.push_back(std::stod(line.substr(0, comma)));
            vs.push_back(std::stod(line.substr(comma + 1)));
        }
        if (rs.size() < 2) throw std::invalid_argument("profile table needs at least two rows");
        MacroProfile prof;
        prof.f = [rs, vs](double r) {
            if (r <= rs.front()) return vs.front();
            if (r >= rs.back()) return vs.back();
            auto it = std::upper_bound(rs.begin(), rs.end(), r);
            const std::size_t i = static_cast<std::size_t>(it - rs.begin());
            const double w = (r - rs[i - 1]) / (rs[i] - rs[i - 1]);
            return (1.0 - w) * vs[i - 1] + w * vs[i];
        };
        prof.breakpoints = rs;
        return prof;
    }
    throw std::invalid_argument("unknown initial profile spec: " + spec);
}

inline DensityProfile lattice_profile(const ModelParams& p, const MacroProfile& u0) {
    DensityProfile prof(p.half_width);
    for (int x = -p.half_width; x <= p.half_width; ++x) {
        const double v = u0(p.epsilon * x);
        if (v < 0.0 || v > 1.0) throw std::invalid_argument("initial profile must take values in [0,1]");
        prof.at(x) = v;
    }
    return prof;
}

inline Metadata base_metadata(const RunConfig& cfg) {
    Metadata m;
    m.add("subcommand", cfg.subcommand);
    m.add("n", cfg.n);
    m.add("k", cfg.k);
    m.add("j", cfg.j);
    m.add("init", cfg.init);
    m.add("t_final", cfg.t_final);
    {
        std::string ts;
        for (double t : cfg.times) ts += (ts.empty() ? "" : " ") + format_double(t);
        m.add("times", ts);
    }
    m.add("replicas", cfg.replicas);
    m.add("seed", static_cast<unsigned long long>(cfg.seed));
    m.add("threads", cfg.threads);
    m.add("dt", cfg.dt);
    m.add("h", cfg.h);
    m.add("trace_step", cfg.trace_step);
    m.add("window", cfg.window);
    m.add("scheme", cfg.scheme);
    m.add("kind", cfg.kind);
    m.add("format", cfg.format);
    return m;
}

inline std::string artifact_path(const RunConfig& cfg, const std::string& name) {
    std::filesystem::create_directories(cfg.out_dir);
    return (std::filesystem::path(cfg.out_dir) / (name + "." + cfg.format)).string();
}

class WallClock {
  public:
    double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

  private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline std::vector<double> default_times(const RunConfig& cfg) {
    if (!cfg.times.empty()) return cfg.times;
    return {0.0, 0.5 * cfg.t_final, cfg.t_final};
}

inline int run_simulate(const RunConfig& cfg, const WallClock& clock) {
    ModelParams p(cfg.n, cfg.k, cfg.j);
    const auto u0 = parse_profile(cfg.init);
    EnsembleOptions opt;
    opt.replicas = cfg.replicas;
    opt.seed = cfg.seed;
    opt.threads = cfg.threads;
    opt.observation_times = default_times(cfg);
    opt.tracked_bonds = cfg.bonds;
    auto stats = ensemble_mean(run_ensemble(p, lattice_profile(p, u0), opt));

    Metadata meta = base_metadata(cfg);
    TableWriter w(meta, {"t", "x", "mean", "stderr"});
    for (std::size_t ti = 0; ti < stats.times.size(); ++ti)
        for (int x = -p.half_width; x <= p.half_width; ++x)
            w.add_row(std::vector<double>{stats.times[ti], static_cast<double>(x), stats.site_means[ti].at(x),
                                          stats.site_stderrs[ti].at(x)});
    w.add_metadata("wall_time_s", clock.seconds());
    w.write(artifact_path(cfg, "simulate_means"), cfg.format);
    return 0;
}

inline int run_oracle(const RunConfig& cfg, const WallClock& clock) {
    ModelParams p(cfg.n, cfg.k, cfg.j);
    const auto u0 = parse_profile(cfg.init);
    auto gen = build_generator(p);
    auto law0 = product_law(p, lattice_profile(p, u0));

    Metadata meta = base_metadata(cfg);
    TableWriter w(meta, {"t", "x", "mean"});
    TableWriter lw(meta, {"t", "state", "probability"});
    for (double t : default_times(cfg)) {
        auto law = evolve_law(gen, law0, t);
        auto marg = marginal_expectations(law, p);
        for (int x = -p.half_width; x <= p.half_width; ++x)
            w.add_row(std::vector<double>{t, static_cast<double>(x), marg.at(x)});
        if (cfg.dump_law)
            for (std::size_t s = 0; s < law.p.size(); ++s)
                lw.add_row(std::vector<double>{t, static_cast<double>(s), law.p[s]});
    }
    w.add_metadata("wall_time_s", clock.seconds());
    w.write(artifact_path(cfg, "oracle_marginals"), cfg.format);
    if (cfg.dump_law) {
        lw.add_metadata("wall_time_s", clock.seconds());
        lw.write(artifact_path(cfg, "oracle_law"), cfg.format);
    }
    return 0;
}

inline int run_evolve(const RunConfig& cfg, const WallClock& clock) {
    ModelParams p(cfg.n, cfg.k, cfg.j);
    const auto u0 = parse_profile(cfg.init);
    const auto times = default_times(cfg);
    DiscreteTrajectory traj = cfg.scheme == "integral"
                                  ? evolve_integral_form(p, lattice_profile(p, u0), cfg.t_final, times, cfg.h)
                                  : evolve_discrete(p, lattice_profile(p, u0), cfg.t_final, times, cfg.dt);

    Metadata meta = base_metadata(cfg);
    meta.add("scheme_used", traj.scheme);
    meta.add("step_size", traj.step_size);
    TableWriter w(meta, {"t", "x", "rho"});
    for (std::size_t ti = 0; ti < traj.times.size(); ++ti)
        for (int x = -p.half_width; x <= p.half_width; ++x)
            w.add_row(std::vector<double>{traj.times[ti], static_cast<double>(x), traj.profiles[ti].at(x)});
    w.add_metadata("wall_time_s", clock.seconds());
    w.write(artifact_path(cfg, "evolve_trajectory"), cfg.format);
    return 0;
}

inline int run_macro(const RunConfig& cfg, const WallClock& clock) {
    const auto u0 = parse_profile(cfg.init);
    auto tr = solve_boundary_traces(u0, cfg.j, cfg.k, cfg.t_final, cfg.trace_step);

    const double slope = 0.5 * (tr.u_plus.back() - tr.u_minus.back());
    Metadata meta = base_metadata(cfg);
    meta.add("final_slope", slope);

    TableWriter w(meta, {"t", "u_plus", "u_minus"});
    for (std::size_t i = 0; i < tr.times.size(); ++i)
        w.add_row(std::vector<double>{tr.times[i], tr.u_plus[i], tr.u_minus[i]});
    w.add_metadata("wall_time_s", clock.seconds());
    w.write(artifact_path(cfg, "macro_traces"), cfg.format);

    if (!cfg.times.empty()) {
        std::vector<double> rs;
        for (int i = 0; i < cfg.r_points; ++i) rs.push_back(-1.0 + 2.0 * i / (cfg.r_points - 1));
        auto sol = reconstruct_density(tr, u0, rs, cfg.times);
        TableWriter dw(meta, {"t", "r", "rho"});
        for (std::size_t ti = 0; ti < sol.times.size(); ++ti)
            for (std::size_t ri = 0; ri < rs.size(); ++ri)
                dw.add_row(std::vector<double>{sol.times[ti], rs[ri], sol.density[ti][ri]});
        dw.add_metadata("wall_time_s", clock.seconds());
        dw.write(artifact_path(cfg, "macro_density"), cfg.format);
    }
    std::cout << "final_slope=" << format_double(slope) << "\n";
    return 0;
}

inline int run_kernels(const RunConfig& cfg, const WallClock& clock) {
    ModelParams p(cfg.n, cfg.k, cfg.j);
    Metadata meta = base_metadata(cfg);

    TableWriter w(meta, {"t", "x", "y", "value"});
    for (double t : default_times(cfg)) {
        if (t <= 0.0) continue;
        ReflectedWalk walk(t, p);
        for (int x = -p.half_width; x <= p.half_width; ++x)
            for (int y = -p.half_width; y <= p.half_width; ++y)
                w.add_row(std::vector<double>{t, static_cast<double>(x), static_cast<double>(y), walk.prob(x, y)});
    }
    w.add_metadata("wall_time_s", clock.seconds());
    w.write(artifact_path(cfg, "kernel_table"), cfg.format);

    TableWriter bw(meta, {"t", "p", "q"});
    for (double t : default_times(cfg)) {
        if (t <= 0.0) continue;
        const auto bk = boundary_kernels(t);
        bw.add_row(std::vector<double>{t, bk.same, bk.cross});
    }
    bw.add_metadata("wall_time_s", clock.seconds());
    bw.write(artifact_path(cfg, "kernel_boundary"), cfg.format);

    auto fw = reservoir_flux_weights(cfg.k);
    TableWriter aw(meta, {"h", "a", "err"});
    for (int hh = 0; hh < cfg.k; ++hh)
        aw.add_row(std::vector<double>{static_cast<double>(hh), fw.a[static_cast<std::size_t>(hh)], fw.err[static_cast<std::size_t>(hh)]});
    aw.add_metadata("wall_time_s", clock.seconds());
    aw.write(artifact_path(cfg, "kernel_flux_weights"), cfg.format);
    return 0;
}

inline int run_fourier(const RunConfig& cfg, const WallClock& clock) {
    ModelParams p(cfg.n, cfg.k, cfg.j);
    const auto u0 = parse_profile(cfg.init);
    const double t = cfg.t_final;

    EnsembleOptions opt;
    opt.replicas = cfg.replicas;
    opt.seed = cfg.seed;
    opt.threads = cfg.threads;
    opt.observation_times = {t, t + cfg.window};
    opt.tracked_bonds = cfg.bonds;
    auto ens = run_ensemble(p, lattice_profile(p, u0), opt);

    const double h_tr = std::min(cfg.trace_step, (t + cfg.window) / 64.0);
    const int steps = static_cast<int>(std::ceil((t + cfg.window) / h_tr));
    auto tr = solve_boundary_traces(u0, cfg.j, cfg.k, steps * h_tr, h_tr);

    std::vector<double> interior;
    for (int b : cfg.bonds) interior.push_back(p.epsilon * b);
    auto rows = fourier_check(ens, tr, u0, interior, t, cfg.window);

    Metadata meta = base_metadata(cfg);
    TableWriter w(meta, {"location", "estimator", "t", "value", "stderr", "half_slope", "gap"});
    for (const auto& row : rows)
        w.add_row(std::vector<std::string>{row.location, row.estimator, format_double(row.t), format_double(row.current.value),
                                           format_double(row.current.stderr_), format_double(row.half_slope), format_double(row.gap)});
    w.add_metadata("wall_time_s", clock.seconds());
    w.write(artifact_path(cfg, "fourier_report"), cfg.format);
    return 0;
}

inline int run_study(const RunConfig& cfg, const WallClock& clock) {
    const auto u0 = parse_profile(cfg.init);
    Metadata meta = base_metadata(cfg);

    if (cfg.kind == "hydro") {
        const double t0 = 0.1, t1 = cfg.t_final;
        std::vector<double> ts;
        for (double t = t0; t <= t1 + 1e-12; t += 0.05) ts.push_back(t);
        auto tr = solve_boundary_traces(u0, cfg.j, cfg.k, t1, 1e-3);
        TableWriter w(meta, {"n", "gap"});
        for (int n : cfg.n_list) {
            ModelParams p(n, cfg.k, cfg.j);
            auto traj = evolve_discrete(p, lattice_profile(p, u0), t1, ts, cfg.dt);
            std::vector<double> rs;
            for (int x = -n; x <= n; ++x) rs.push_back(p.epsilon * x);
            auto sol = reconstruct_density(tr, u0, rs, ts);
            w.add_row(std::vector<double>{static_cast<double>(n), hydrodynamic_gap(traj, sol, t0, t1)});
        }
        w.add_metadata("wall_time_s", clock.seconds());
        w.write(artifact_path(cfg, "study_hydro"), cfg.format);
        return 0;
    }
    if (cfg.kind == "moduli") {
        TableWriter w(meta, {"n", "c_space", "c_time", "max_space", "max_time"});
        std::vector<double> ts;
        for (double t = 0.01; t <= cfg.t_final + 1e-12; t *= std::sqrt(2.0)) ts.push_back(t);
        for (int n : cfg.n_list) {
            ModelParams p(n, cfg.k, cfg.j);
            auto traj = evolve_discrete(p, lattice_profile(p, u0), ts.back(), ts, cfg.dt);
            auto rep = continuity_moduli(traj);
            w.add_row(std::vector<double>{static_cast<double>(n), rep.fitted_space_constant, rep.fitted_time_constant,
                                          rep.max_space_modulus, rep.max_time_modulus});
        }
        w.add_metadata("wall_time_s", clock.seconds());
        w.write(artifact_path(cfg, "study_moduli"), cfg.format);
        return 0;
    }
    if (cfg.kind == "delta") {
        ModelParams p(cfg.n, cfg.k, cfg.j);
        auto rho0 = lattice_profile(p, u0);
        TableWriter w(meta, {"delta", "gap"});
        for (double d : cfg.delta_list) {
            std::vector<double> outs;
            for (double t = d; t <= cfg.t_final + 1e-12; t += 0.01) outs.push_back(t);
            auto reg = evolve_regularized(p, rho0, d, cfg.t_final, outs, cfg.dt);
            auto full = evolve_discrete(p, rho0, cfg.t_final, outs, cfg.dt);
            double sup = 0.0;
            for (std::size_t ti = 0; ti < outs.size(); ++ti)
                for (int i = 0; i < p.num_sites(); ++i)
                    sup = std::max(sup, std::abs(reg.profiles[ti].values[static_cast<std::size_t>(i)] -
                                                 full.profiles[ti].values[static_cast<std::size_t>(i)]));
            w.add_row(std::vector<double>{d, sup});
        }
        w.add_metadata("wall_time_s", clock.seconds());
        w.write(artifact_path(cfg, "study_delta"), cfg.format);
        return 0;
    }
    throw std::invalid_argument("unknown study kind: " + cfg.kind);
}

} // namespace cli_detail

/// Dispatch a validated configuration.  Throws std::invalid_argument for
/// configuration problems and std::runtime_error for numerical aborts.
inline int run(RunConfig cfg) {
    if (const char* env = std::getenv("SEPR_OUTPUT_DIR")) cfg.out_dir = env;
    cli_detail::WallClock clock;
    if (cfg.subcommand == "simulate") return cli_detail::run_simulate(cfg, clock);
    if (cfg.subcommand == "oracle") return cli_detail::run_oracle(cfg, clock);
    if (cfg.subcommand == "evolve") return cli_detail::run_evolve(cfg, clock);
    if (cfg.subcommand == "macro") return cli_detail::run_macro(cfg, clock);
    if (cfg.subcommand == "kernels") return cli_detail::run_kernels(cfg, clock);
    if (cfg.subcommand == "fourier") return cli_detail::run_fourier(cfg, clock);
    if (cfg.subcommand == "study") return cli_detail::run_study(cfg, clock);
    throw std::invalid_argument("unknown subcommand: " + cfg.subcommand);
}

} // namespace sepr
