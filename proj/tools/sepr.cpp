// Command-line front end: simulation ensembles, the exact master equation,
// the discretized evolution, the macroscopic solver, kernel tables, the
// Fourier-law pipeline, and N-ladder convergence studies.
//
// Exit codes: 0 ok, 1 configuration error, 2 numerical abort.

#include <CLI11.hpp>

#include <sepr/cli.hpp>

#include <iostream>

int main(int argc, char** argv) {
    sepr::RunConfig cfg;

    CLI::App app{"sepr - symmetric simple exclusion process with current reservoirs"};
    app.set_config("--config", "", "flat key=value configuration file; flags override");

    app.add_option("--n", cfg.n, "lattice half width N");
    app.add_option("--k", cfg.k, "reservoir width K");
    app.add_option("--j", cfg.j, "reservoir rate parameter j");
    app.add_option("--init", cfg.init, "initial profile: const:c | linear:a,b | step:lo,hi[,r0] | table:file");
    app.add_option("--t-final", cfg.t_final, "final macroscopic time");
    app.add_option("--times", cfg.times, "observation/output times (default: 0, T/2, T)");
    app.add_option("--replicas", cfg.replicas, "ensemble size");
    app.add_option("--seed", cfg.seed, "ensemble seed");
    app.add_option("--threads", cfg.threads, "worker threads (0 = available parallelism)");
    app.add_option("--dt", cfg.dt, "splitting step (0 = eps^2/2)");
    app.add_option("--int-step", cfg.h, "integral-form step (0 = eps^2/4)");
    app.add_option("--trace-step", cfg.trace_step, "macro trace grid step");
    app.add_option("--window", cfg.window, "counting-estimator time window");
    app.add_option("--bonds", cfg.bonds, "tracked bonds (left sites)");
    app.add_option("--r-points", cfg.r_points, "macro density grid size");
    app.add_option("--scheme", cfg.scheme, "evolve scheme: splitting | integral");
    app.add_option("--kind", cfg.kind, "study kind: hydro | moduli | delta");
    app.add_option("--n-list", cfg.n_list, "study lattice ladder");
    app.add_option("--delta-list", cfg.delta_list, "study regularization ladder");
    app.add_flag("--dump-law", cfg.dump_law, "oracle: also dump the full law");
    app.add_option("--out", cfg.out_dir, "output directory (SEPR_OUTPUT_DIR overrides)");
    app.add_option("--format", cfg.format, "output format: csv | json")->check(CLI::IsMember({"csv", "json"}));

    for (const char* name : {"simulate", "oracle", "evolve", "macro", "kernels", "fourier", "study"})
        app.add_subcommand(name)->fallthrough();
    app.require_subcommand(1);

    try {
        app.parse(argc, argv);
        cfg.subcommand = app.get_subcommands().front()->get_name();
        return sepr::run(cfg);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "numerical abort: " << e.what() << "\n";
        return 2;
    }
}
