/**
 * @file kgm_solve.cpp
 * @brief Command-line front end: eps sweeps, profile dumps and snapshot inspection.
 *
 *   kgm_solve [--config FILE] [overrides...]      run a sweep (default)
 *   kgm_solve profile --c0 1.75 --p 4 [--out F]   dump the radial ground state
 *   kgm_solve inspect FILE.kgmf                   print a snapshot summary
 */
#include "kgm/kgm.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

int run_sweep(const std::optional<std::string>& config_path, const std::vector<std::pair<std::string, std::string>>& overrides) {
    kgm::ExperimentConfig cfg;
    if (config_path) cfg = kgm::load_config(*config_path);
    // length first, so that eps values written as L/k see the final box size
    for (const auto& [k, v] : overrides)
        if (k == "length") kgm::apply_setting(cfg, k, v);
    for (const auto& [k, v] : overrides)
        if (k != "length") kgm::apply_setting(cfg, k, v);
    cfg.validate();
    const auto res = kgm::run_experiment(cfg, std::cerr);
    for (const auto& s : res.sweep) {
        std::printf("eps=%.6g best_energy=%.10g m_inf=%.10g converged=%zu/%zu certified=%zu clusters=%zu\n", s.eps,
                    s.best_energy, res.profile.m_inf, s.converged, res.seeds.size(), s.certified, s.clusters);
    }
    std::printf("report: %s\n", (cfg.output_dir / "report.csv").string().c_str());
    return res.exit_code;
}

int dump_profile(double c0, double p, double tol, const std::string& out) {
    const kgm::RadialProfile prof = kgm::shoot_ground_state(c0, p, tol);
    if (out.empty() || out == "-") {
        kgm::write_profile(prof, std::cout);
        return 0;
    }
    std::ofstream os(out);
    if (!os) throw kgm::IoError("cannot write " + out);
    kgm::write_profile(prof, os);
    std::printf("U(0)=%.12g m_inf=%.12g decay_rate=%.6g samples=%zu -> %s\n", prof.u0, prof.m_inf, prof.decay_rate,
                prof.r_samples.size(), out.c_str());
    return 0;
}

int inspect(const std::string& path) {
    const kgm::FieldSnapshot snap = kgm::load_field(path);
    const kgm::Field& u = snap.field;
    std::printf("n=%zu L=%.17g eps=%.17g\n", u.grid().n(), u.grid().length(), snap.eps);
    std::printf("min=%.17g max=%.17g integral=%.17g\n", u.min(), u.max(), kgm::integrate(u));
    const auto peaks = kgm::find_peaks(u, 0.5);
    std::printf("peaks(>=0.5 max)=%zu\n", peaks.size());
    for (const auto& pk : peaks)
        std::printf("  peak at (%.10g, %.10g, %.10g) value %.17g\n", pk.position[0], pk.position[1], pk.position[2],
                    pk.value);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Low-energy single-peak solutions of Klein-Gordon-Maxwell and Schroedinger-Maxwell systems on a "
                 "flat 3-torus"};
    app.require_subcommand(0, 1);

    std::optional<std::string> config_path;
    std::vector<std::pair<std::string, std::string>> overrides;
    app.add_option("--config", config_path, "key = value configuration file");
    auto add_override = [&](const std::string& flag, const std::string& key, const std::string& help) {
        app.add_option_function<std::string>(
            flag, [&overrides, key](const std::string& v) { overrides.emplace_back(key, v); }, help);
    };
    add_override("--system", "system", "KGM or SM");
    add_override("--p", "p", "nonlinearity exponent");
    add_override("--a", "a", "KGM mass parameter a");
    add_override("--q", "q", "coupling constant q");
    add_override("--omega", "omega", "frequency omega");
    add_override("--eps-list", "eps_list", "strictly decreasing eps values, e.g. L/16,L/32");
    add_override("--grid-n", "grid_n", "grid points per axis (even, >= 16)");
    add_override("--length", "length", "box side L, e.g. 2pi");
    add_override("--seed-lattice", "seed_lattice", "m: use m^3 lattice seeds");
    add_override("--seeds", "seeds", "explicit seeds 'x,y,z; x,y,z'");
    add_override("--grad-tol", "grad_tol", "gradient norm stopping threshold");
    add_override("--max-iters", "max_iters", "iteration budget per seed");
    add_override("--workers", "workers", "seed-level worker threads (0 = all cores)");
    add_override("--out", "output_dir", "output directory");
    app.add_flag_callback("--emit-fields", [&] { overrides.emplace_back("emit_fields", "true"); },
                          "write KGMF snapshots of every solution");
    app.add_flag_callback("--verbose", [&] { overrides.emplace_back("verbose", "true"); },
                          "log one line per iteration: iter energy grad_norm t step");

    auto* prof_cmd = app.add_subcommand("profile", "compute and dump the radial ground state");
    double c0 = 1.0, p = 4.0, tol = 1e-10;
    std::string prof_out;
    prof_cmd->add_option("--c0", c0, "linear coefficient c0")->required();
    prof_cmd->add_option("--p", p, "exponent p")->required();
    prof_cmd->add_option("--tol", tol, "tail tolerance U(r_max) < tol U(0)");
    prof_cmd->add_option("--out", prof_out, "output file ('-' for stdout)");

    auto* inspect_cmd = app.add_subcommand("inspect", "summarise a KGMF field snapshot");
    std::string snap_path;
    inspect_cmd->add_option("file", snap_path, "snapshot file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*prof_cmd) return dump_profile(c0, p, tol, prof_out);
        if (*inspect_cmd) return inspect(snap_path);
        return run_sweep(config_path, overrides);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
