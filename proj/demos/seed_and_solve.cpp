/**
 * @file seed_and_solve.cpp
 * @brief Minimal library walk-through: ground state, one seed, one descent,
 *        then the single-peak diagnostics.
 */
#include "kgm/kgm.hpp"

#include <cstdio>
#include <numbers>

int main() {
    const double L = 2.0 * std::numbers::pi;
    const auto grid = kgm::make_grid(48, L);
    const auto params = kgm::SystemParams::kgm(L / 16.0, 2.0, 1.0, 0.5, 4.0);
    params.validate();

    const kgm::RadialProfile profile = kgm::shoot_ground_state(params.c0(), params.p);
    std::printf("U(0) = %.10f   m_inf = %.10f\n", profile.u0, profile.m_inf);

    const kgm::Point xi{L / 4.0, L / 4.0, L / 4.0};
    const kgm::NehariPoint seed = kgm::phi_seed(xi, params, profile, grid);
    std::printf("seed: t = %.6f  energy = %.10f  N = %.2e  H'' = %.4g\n", seed.t, seed.energy, seed.nehari_residual,
                seed.h_second);

    kgm::SolveOptions opts;
    opts.grad_tol = 1e-8;
    const kgm::SolveResult res = kgm::minimize(seed, params, opts);
    const kgm::SolutionRecord rec = kgm::analyze_solution(res, params, profile);
    std::printf("%s after %zu iterations: energy = %.10f  |grad| = %.2e\n", kgm::to_string(res.status), res.iterations,
                rec.energy, rec.grad_norm);
    std::printf("peaks = %zu  maxval margin = %.4f  profile residual = %.4f  barycenter = (%.4f, %.4f, %.4f)\n",
                rec.num_peaks, rec.maxval_margin, rec.profile_sup_error, rec.barycenter[0], rec.barycenter[1],
                rec.barycenter[2]);
    return res.status == kgm::SolveStatus::Converged ? 0 : 1;
}
