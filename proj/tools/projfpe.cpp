#include "projfpe/errors.hpp"
#include "projfpe/harness.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

struct CommonFlags {
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> grid_nodes;
    bool quiet = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--out", flags.out_dir, "Output directory (overrides the config)");
    cmd->add_option("--seed", flags.seed, "Monte Carlo seed (overrides the config)");
    cmd->add_option("--grid-nodes", flags.grid_nodes,
                    "Gauss-Legendre nodes per panel (overrides the config)");
    cmd->add_flag("--quiet", flags.quiet, "Suppress progress output");
}

projfpe::ExperimentConfig load_config(const std::string& path, const CommonFlags& flags) {
    projfpe::ExperimentConfig config = projfpe::ExperimentConfig::from_json_file(path);
    if (!flags.out_dir.empty()) config.out_dir = flags.out_dir;
    if (flags.seed) config.mc.seed = *flags.seed;
    if (flags.grid_nodes) config.grid.nodes_per_panel = *flags.grid_nodes;
    config.quiet = flags.quiet;
    return config;
}

int run_guarded(const std::function<void()>& body) {
    try {
        body();
        return 0;
    } catch (const projfpe::ConfigError& e) {
        std::cerr << "validation error: " << e.what() << '\n';
        return 2;
    } catch (const projfpe::UsageError& e) {
        std::cerr << "validation error: " << e.what() << '\n';
        return 2;
    } catch (const projfpe::DomainError& e) {
        std::cerr << "validation error: " << e.what() << '\n';
        return 2;
    } catch (const projfpe::Error& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 3;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fisher-metric projection of the Fokker-Planck equation onto "
                 "exponential families"};
    app.require_subcommand(1);

    std::string config_path;
    CommonFlags flags;

    CLI::App* project = app.add_subcommand("project", "Integrate the projected parameter ODE");
    project->add_option("config", config_path, "JSON config file")->required();
    add_common(project, flags);

    CLI::App* reconstruct = app.add_subcommand(
        "reconstruct", "Emit reconstructed-drift grids, then simulate and compare");
    reconstruct->add_option("config", config_path, "JSON config file")->required();
    add_common(reconstruct, flags);

    CLI::App* simulate = app.add_subcommand(
        "simulate", "Simulate the reconstructed diffusion and compare to the projected density");
    simulate->add_option("config", config_path, "JSON config file")->required();
    add_common(simulate, flags);

    CLI::App* converge = app.add_subcommand("converge", "Nested-family convergence sweep");
    converge->add_option("config", config_path, "JSON config file")->required();
    add_common(converge, flags);

    CLI::App* oracle = app.add_subcommand(
        "oracle", "Finite-difference reference vs exact Gaussian evolution");
    oracle->add_option("config", config_path, "JSON config file")->required();
    add_common(oracle, flags);

    CLI::App* geometry = app.add_subcommand("geometry-check",
                                            "Exponential-manifold identity checks");
    add_common(geometry, flags);

    CLI11_PARSE(app, argc, argv);

    if (project->parsed()) {
        return run_guarded([&] {
            const auto config = load_config(config_path, flags);
            const auto res = projfpe::run_projection(config);
            if (!config.quiet) {
                std::printf("projected %zu steps; terminal mean %.9g var %.9g, max residual %.3g\n",
                            res.trajectory.points.size() - 1, res.terminal_mean,
                            res.terminal_var, res.max_residual);
                for (const auto& f : res.files) std::printf("wrote %s\n", f.c_str());
            }
        });
    }
    if (reconstruct->parsed() || simulate->parsed()) {
        const bool emit_ustar = reconstruct->parsed();
        return run_guarded([&] {
            const auto config = load_config(config_path, flags);
            const auto res = projfpe::run_reconstruction(config, emit_ustar);
            if (!config.quiet) {
                std::printf("simulated %zu paths (excluded %ld); L1 %.4g, Hellinger %.4g\n",
                            res.ensemble.n_paths, res.ensemble.excluded, res.distances.l1,
                            res.distances.hellinger);
                for (const auto& f : res.files) std::printf("wrote %s\n", f.c_str());
            }
        });
    }
    if (converge->parsed()) {
        return run_guarded([&] {
            const auto config = load_config(config_path, flags);
            const auto report = projfpe::run_convergence(config);
            if (!config.quiet) {
                for (const auto& r : report.rows) {
                    if (r.ok)
                        std::printf("m=%d  L1 %.4g  Hellinger %.4g  residual(0) %.4g  "
                                    "int-residual %.4g  sup|u-f| %.4g\n",
                                    r.m, r.l1, r.hellinger, r.residual_t0,
                                    r.integrated_residual, r.drift_sup_distance);
                    else
                        std::printf("m=%d  failed: %s\n", r.m, r.error.c_str());
                }
                for (const auto& f : report.files) std::printf("wrote %s\n", f.c_str());
            }
        });
    }
    if (oracle->parsed()) {
        return run_guarded([&] {
            const auto config = load_config(config_path, flags);
            const auto res = projfpe::run_oracle(config);
            if (!config.quiet) {
                std::printf("fd vs exact: L1 %.4g, Hellinger %.4g, KL %.4g; mass drift %.3g\n",
                            res.distances.l1, res.distances.hellinger, res.distances.kl,
                            res.mass_drift);
                for (const auto& f : res.files) std::printf("wrote %s\n", f.c_str());
            }
        });
    }
    // geometry-check
    return run_guarded([&] {
        const auto rows = projfpe::run_geometry_check();
        bool all_pass = true;
        std::filesystem::create_directories(flags.out_dir.empty() ? "out" : flags.out_dir);
        const std::string path =
            (flags.out_dir.empty() ? std::string("out") : flags.out_dir) + "/geometry_check.csv";
        std::ofstream csv(path);
        csv << "check,value,reference,error,tolerance,pass\n";
        for (const auto& r : rows) {
            if (!flags.quiet)
                std::printf("[%s] %s: value %.10g (reference %.10g, error %.3g, tol %.3g)\n",
                            r.pass ? "PASS" : "FAIL", r.name.c_str(), r.value, r.reference,
                            r.error, r.tolerance);
            char line[256];
            std::snprintf(line, sizeof(line), "%s,%.12g,%.12g,%.12g,%.12g,%d\n",
                          r.name.c_str(), r.value, r.reference, r.error, r.tolerance,
                          r.pass ? 1 : 0);
            csv << line;
            all_pass = all_pass && r.pass;
        }
        if (!all_pass) throw projfpe::NumericalError("geometry-check: some identities failed");
    });
}
