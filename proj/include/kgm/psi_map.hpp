/**
 * @file psi_map.hpp
 * @brief The auxiliary map u -> psi(u) solving the second equation of each
 *        system, and its derivative h -> V_u(h).
 *
 * KGM:  (-Delta + 1 + q^2 u^2) psi = q u^2,
 *       (-Delta + 1 + q^2 u^2) V   = 2 q u (1 - q psi) h.
 * SM:   (-Delta + 1) psi = q u^2,   (-Delta + 1) V = 2 q u h.
 *
 * The SM operator is diagonal in Fourier space. The KGM operator is symmetric
 * positive definite and is inverted by conjugate gradients, preconditioned
 * with the constant-coefficient operator built from the mean of q^2 u^2.
 */
#pragma once

#include "kgm/errors.hpp"
#include "kgm/grid.hpp"

#include <cmath>
#include <cstddef>
#include <optional>

namespace kgm {

inline constexpr double default_psi_tol = 1e-10;

struct LinearSolveStats {
    std::size_t iterations = 0;
    double relative_residual = 0.0;
};

namespace detail {

/// (-Delta + 1 + coeff) x, coeff = q^2 u^2 sampled pointwise.
inline Field apply_kgm_operator(const Field& x, const Field& coeff) {
    Field out(x.grid_ptr());
    x.grid().apply_multiplier(x.values(), out.values(), [](double k2) { return k2 + 1.0; });
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += coeff[i] * x[i];
    return out;
}

/**
 * Preconditioned CG for (-Delta + 1 + coeff) x = rhs.
 *
 * Stops on the true residual ||A x - rhs||_2 <= tol ||rhs||_2; the recursive
 * residual is only used to decide when to re-check.
 */
inline Field solve_kgm_operator(const Field& coeff, const Field& rhs, double tol, const Field* warm,
                                LinearSolveStats* stats = nullptr) {
    const double rhs_norm = l2_norm(rhs);
    if (rhs_norm == 0.0) return Field(rhs.grid_ptr());
    const double shift = 1.0 + integrate(coeff) / rhs.grid().volume();
    auto precondition = [&](const Field& r) { return spectral_solve(r, 1.0, shift); };

    Field x = warm ? *warm : precondition(rhs);
    constexpr std::size_t max_iterations = 1000;
    std::size_t total = 0;
    double rel = 0.0;
    for (int restart = 0; restart < 5; ++restart) {
        Field r = rhs - apply_kgm_operator(x, coeff);
        rel = l2_norm(r) / rhs_norm;
        if (rel <= tol) break;
        Field z = precondition(r);
        Field d = z;
        double rz = inner(r, z);
        while (total < max_iterations) {
            ++total;
            Field ad = apply_kgm_operator(d, coeff);
            const double alpha = rz / inner(d, ad);
            x.axpy(alpha, d);
            r.axpy(-alpha, ad);
            if (l2_norm(r) <= 0.5 * tol * rhs_norm) break;
            z = precondition(r);
            const double rz_new = inner(r, z);
            const double beta = rz_new / rz;
            rz = rz_new;
            for (std::size_t i = 0; i < d.size(); ++i) d[i] = z[i] + beta * d[i];
        }
        if (total >= max_iterations) {
            rel = l2_norm(rhs - apply_kgm_operator(x, coeff)) / rhs_norm;
            if (rel <= tol) break;
            throw NoConvergence(total, rel);
        }
    }
    if (rel > tol) {
        rel = l2_norm(rhs - apply_kgm_operator(x, coeff)) / rhs_norm;
        if (rel > tol) throw NoConvergence(total, rel);
    }
    if (stats) *stats = {total, rel};
    return x;
}

inline Field square_coefficient(const Field& u, double q) {
    Field c(u.grid_ptr());
    for (std::size_t i = 0; i < u.size(); ++i) c[i] = q * q * u[i] * u[i];
    return c;
}

} // namespace detail

/**
 * psi(u) with relative residual at most tol (KGM); a single spectral division for SM.
 *
 * `warm` is an optional initial guess for the KGM iteration.
 */
inline Field solve_psi(const Field& u, const SystemParams& params, double tol = default_psi_tol,
                       const Field* warm = nullptr, LinearSolveStats* stats = nullptr) {
    if (!(tol > 0.0)) throw std::invalid_argument("solve_psi: tol must be positive");
    Field rhs(u.grid_ptr());
    for (std::size_t i = 0; i < u.size(); ++i) rhs[i] = params.q * u[i] * u[i];
    if (params.system == SystemKind::SM) {
        if (stats) *stats = {};
        return spectral_solve(rhs, 1.0, 1.0);
    }
    if (warm) warm->require_same_grid(u);
    return detail::solve_kgm_operator(detail::square_coefficient(u, params.q), rhs, tol, warm, stats);
}

/// V_u(h) = psi'(u)[h]; `psi` must be solve_psi(u).
inline Field solve_V(const Field& u, const Field& h, const Field& psi, const SystemParams& params,
                     double tol = default_psi_tol, LinearSolveStats* stats = nullptr) {
    u.require_same_grid(h);
    u.require_same_grid(psi);
    const double q = params.q;
    Field rhs(u.grid_ptr());
    if (params.system == SystemKind::SM) {
        for (std::size_t i = 0; i < u.size(); ++i) rhs[i] = 2.0 * q * u[i] * h[i];
        if (stats) *stats = {};
        return spectral_solve(rhs, 1.0, 1.0);
    }
    for (std::size_t i = 0; i < u.size(); ++i) rhs[i] = 2.0 * q * u[i] * (1.0 - q * psi[i]) * h[i];
    return detail::solve_kgm_operator(detail::square_coefficient(u, q), rhs, tol, nullptr, stats);
}

} // namespace kgm
