/**
 * @file energy.hpp
 * @brief The reduced functional I_eps, its first variation, the Nehari
 *        constraint and the fiber projection onto it.
 *
 * With psi = psi(u), C1 = eps^-3 int u^2 psi, C2 = eps^-3 int u^2 psi^2 and
 * P = |u+|_{eps,p}^p:
 *
 *   KGM:  I(u) = 1/2 ||u||^2 + (omega^2 q / 2) C1 - P / p
 *         R    = -eps^2 Lap u + a u - (u+)^{p-1} - omega^2 (1 - q psi)^2 u
 *   SM:   I(u) = 1/2 ||u||^2 + (omega / 4) C1 - P / p
 *         R    = -eps^2 Lap u + u + omega psi u - (u+)^{p-1}
 *
 * so that I'(u)[phi] = eps^-3 int R phi. The SM weight omega/4 follows from
 * int u^2 V_u(phi) = 2 int psi u phi, which makes the first variation produce
 * exactly the omega u v term of the system.
 */
#pragma once

#include "kgm/errors.hpp"
#include "kgm/grid.hpp"
#include "kgm/ground_state.hpp"
#include "kgm/psi_map.hpp"

#include <boost/math/tools/toms748_solve.hpp>

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <utility>

namespace kgm {

/// Every integral the functional and its Nehari forms are assembled from.
struct EnergyTerms {
    double norm_sq = 0.0;        ///< ||u||_eps^2
    double coupling = 0.0;       ///< eps^-3 int u^2 psi
    double coupling_sq = 0.0;    ///< eps^-3 int u^2 psi^2
    double positive_power = 0.0; ///< |u+|_{eps,p}^p
};

inline EnergyTerms energy_terms(const Field& u, const Field& psi, const SystemParams& params) {
    u.require_same_grid(psi);
    const double e3 = params.eps * params.eps * params.eps;
    const auto a = u.values();
    const auto s = psi.values();
    const double h3 = u.grid().cell_volume();
    EnergyTerms t;
    t.norm_sq = h_eps_norm_sq(u, params);
    t.coupling = h3 * pairwise_reduce(0, a.size(), [&](std::size_t i) { return a[i] * a[i] * s[i]; }) / e3;
    t.coupling_sq = h3 * pairwise_reduce(0, a.size(), [&](std::size_t i) { return a[i] * a[i] * s[i] * s[i]; }) / e3;
    t.positive_power = positive_power_integral(u, params.p, params.eps);
    return t;
}

inline double energy_from_terms(const EnergyTerms& t, const SystemParams& params) {
    const double w = params.omega;
    const double coupling_weight = params.system == SystemKind::KGM ? 0.5 * w * w * params.q : 0.25 * w;
    return 0.5 * t.norm_sq + coupling_weight * t.coupling - t.positive_power / params.p;
}

/// I_eps(u); `psi` must be solve_psi(u).
inline double energy(const Field& u, const Field& psi, const SystemParams& params) {
    return energy_from_terms(energy_terms(u, psi, params), params);
}

/// Strong-form residual R with I'(u)[phi] = eps^-3 int R phi.
inline Field gradient(const Field& u, const Field& psi, const SystemParams& params) {
    u.require_same_grid(psi);
    Field r = laplacian(u);
    const double e2 = params.eps * params.eps;
    const double p = params.p, q = params.q, w = params.omega;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double v = u[i];
        const double nonlinear = v > 0.0 ? std::pow(v, p - 1.0) : 0.0;
        double linear;
        if (params.system == SystemKind::KGM) {
            const double f = 1.0 - q * psi[i];
            linear = (params.a - w * w * f * f) * v;
        } else {
            linear = (1.0 + w * psi[i]) * v;
        }
        r[i] = -e2 * r[i] + linear - nonlinear;
    }
    return r;
}

/// Riesz representative of I'(u) in H_eps: (eps^2(-Lap) + c0)^{-1} R.
inline Field preconditioned_gradient(const Field& residual, const SystemParams& params) {
    return spectral_solve(residual, params.eps * params.eps, params.c0());
}

/// ||g||_eps for g the Riesz representative of R; equals the dual norm of I'(u).
inline double gradient_norm(const Field& residual, const Field& riesz, const SystemParams& params) {
    const double e3 = params.eps * params.eps * params.eps;
    return std::sqrt(std::max(inner(residual, riesz) / e3, 0.0));
}

inline double nehari_from_terms(const EnergyTerms& t, const SystemParams& params) {
    const double w = params.omega, q = params.q;
    if (params.system == SystemKind::KGM)
        return t.norm_sq - t.positive_power + q * w * w * (2.0 * t.coupling - q * t.coupling_sq);
    return t.norm_sq - t.positive_power + w * t.coupling;
}

/// N_eps(u) = I'(u)[u].
inline double nehari_residual(const Field& u, const Field& psi, const SystemParams& params) {
    return nehari_from_terms(energy_terms(u, psi, params), params);
}

/**
 * The two closed forms of I on the Nehari set: one in terms of ||u||^2, one in
 * terms of |u+|^p. They agree with energy() only when N_eps(u) = 0.
 */
inline std::pair<double, double> nehari_energy_forms(const Field& u, const Field& psi, const SystemParams& params) {
    const EnergyTerms t = energy_terms(u, psi, params);
    const double p = params.p, q = params.q, w = params.omega;
    if (params.system == SystemKind::KGM) {
        const double by_norm = (0.5 - 1.0 / p) * t.norm_sq + (0.5 - 2.0 / p) * w * w * q * t.coupling +
                               w * w * q * q * t.coupling_sq / p;
        const double by_power = (0.5 - 1.0 / p) * t.positive_power + 0.5 * w * w * q * q * t.coupling_sq -
                                0.5 * w * w * q * t.coupling;
        return {by_norm, by_power};
    }
    const double by_norm = (0.5 - 1.0 / p) * t.norm_sq + (0.25 - 1.0 / p) * w * t.coupling;
    const double by_power = (0.5 - 1.0 / p) * t.positive_power - 0.25 * w * t.coupling;
    return {by_norm, by_power};
}

// ---------------------------------------------------------------------------
// Nehari projection
// ---------------------------------------------------------------------------

struct NehariPoint {
    Field u;                      ///< the projected field t * input
    Field psi;                    ///< psi(u)
    double t = 1.0;               ///< fiber scalar applied to the input field
    double energy = 0.0;          ///< I_eps(u)
    double nehari_residual = 0.0; ///< N_eps(u)
    double h_second = 0.0;        ///< H''(t) of the fiber map at the root
    double norm_sq = 0.0;         ///< ||u||_eps^2
};

struct ProjectionOptions {
    double t_tol = 1e-13;   ///< relative tolerance on the root t
    double psi_tol = 1e-12; ///< residual tolerance of inner psi solves
};

/// u / |u+|_{eps,p}.
inline Field normalize_positive_part(const Field& u, const SystemParams& params) {
    const double s = lp_norm_eps(u, params.p, params.eps, true);
    if (!(s > 0.0)) throw ZeroPositivePart();
    return u * (1.0 / s);
}

/**
 * Finds the unique t > 0 with t u on the Nehari set, i.e. the critical point
 * of the fiber map H(t) = I(t u).
 *
 * The root of g(t) = t^{p-2} P - ||u||^2 - (coupling at t u) is bracketed
 * below by the decoupled root (||u||^2 / P)^{1/(p-2)}, where the positive
 * coupling makes g <= 0, and above by doubling. For KGM every evaluation
 * re-solves psi(t u) starting from the previous solution; for SM the
 * homogeneity psi(t u) = t^2 psi(u) reduces g to a scalar function.
 *
 * The caller is expected to pass u with |u+|_{eps,p} = 1 (see
 * normalize_positive_part); the formulas hold for any u with u+ != 0.
 */
inline NehariPoint project_nehari(const Field& u, const SystemParams& params, const ProjectionOptions& opts = {},
                                  const Field* psi_guess = nullptr) {
    const double p = params.p, q = params.q, w = params.omega;
    const double e3 = params.eps * params.eps * params.eps;
    const double P = positive_power_integral(u, p, params.eps);
    if (!(P > 0.0)) throw ZeroPositivePart();
    const double A = h_eps_norm_sq(u, params);
    const double h3 = u.grid().cell_volume();

    // eps^-3 int u^2 f(psi) with u the unscaled direction.
    auto weighted = [&](const Field& psi, auto f) {
        const auto a = u.values();
        const auto s = psi.values();
        return h3 * pairwise_reduce(0, a.size(), [&](std::size_t i) { return a[i] * a[i] * f(s[i]); }) / e3;
    };

    const double t0 = std::pow(A / P, 1.0 / (p - 2.0));
    std::optional<Field> psi_last;
    if (psi_guess) psi_last = *psi_guess;

    std::function<double(double)> g;
    double sm_b = 0.0;
    if (params.system == SystemKind::SM) {
        const Field psi_u = solve_psi(u, params);
        sm_b = w * weighted(psi_u, [](double s) { return s; });
        g = [&](double t) { return std::pow(t, p - 2.0) * P - A - sm_b * t * t; };
    } else {
        g = [&](double t) {
            if (w == 0.0) return std::pow(t, p - 2.0) * P - A;
            Field psi_t = solve_psi(u * t, params, opts.psi_tol, psi_last ? &*psi_last : nullptr);
            const double f = weighted(psi_t, [q](double s) { return (2.0 - q * s) * s; });
            psi_last = std::move(psi_t);
            return std::pow(t, p - 2.0) * P - A - q * w * w * f;
        };
    }

    double t_root = t0;
    const double g0 = (w == 0.0) ? 0.0 : g(t0);
    if (g0 < 0.0) {
        double hi = t0 * 1.05;
        double g_hi = g(hi);
        int doublings = 0;
        while (g_hi <= 0.0) {
            if (++doublings > 40)
                throw NoRoot("project_nehari: fiber derivative has no sign change up to t = " + std::to_string(hi));
            hi *= 2.0;
            g_hi = g(hi);
        }
        std::uintmax_t max_iter = 100;
        const double rel = opts.t_tol;
        auto stop = [rel](double a, double b) { return std::abs(b - a) <= rel * std::max(std::abs(a), std::abs(b)); };
        const auto bracket = boost::math::tools::toms748_solve(g, t0, hi, g0, g_hi, stop, max_iter);
        t_root = 0.5 * (bracket.first + bracket.second);
        if (max_iter >= 100) throw NoRoot("project_nehari: root refinement did not converge");
    }

    NehariPoint pt{u * t_root, Field(u.grid_ptr())};
    pt.t = t_root;
    if (params.system == SystemKind::SM) {
        pt.psi = solve_psi(pt.u, params);
    } else {
        pt.psi = solve_psi(pt.u, params, opts.psi_tol, psi_last ? &*psi_last : nullptr);
    }
    const EnergyTerms terms = energy_terms(pt.u, pt.psi, params);
    pt.energy = energy_from_terms(terms, params);
    pt.nehari_residual = nehari_from_terms(terms, params);
    pt.norm_sq = terms.norm_sq;

    const double tp = std::pow(t_root, p - 2.0);
    if (params.system == SystemKind::SM) {
        pt.h_second = A - (p - 1.0) * tp * P + 3.0 * sm_b * t_root * t_root;
    } else if (w == 0.0) {
        pt.h_second = A - (p - 1.0) * tp * P;
    } else {
        // d/dt of eps^-3 int (2 - q psi(tu)) psi(tu) u^2 is 2 eps^-3 int (1 - q psi) V_{tu}(u) u^2.
        const Field v = solve_V(pt.u, u, pt.psi, params, opts.psi_tol);
        const double f = weighted(pt.psi, [q](double s) { return (2.0 - q * s) * s; });
        const auto a = u.values();
        double df = h3 * pairwise_reduce(0, a.size(), [&](std::size_t i) {
                        return (1.0 - q * pt.psi[i]) * v[i] * a[i] * a[i];
                    }) / e3;
        pt.h_second = A - (p - 1.0) * tp * P + q * w * w * (f + 2.0 * t_root * df);
    }
    return pt;
}

/**
 * Phi_eps(xi) = t_eps(W) W for the bump W = W_{eps,xi}.
 *
 * The returned t is the scalar applied to W itself (not to its normalization).
 */
inline NehariPoint phi_seed(const Point& xi, const SystemParams& params, const RadialProfile& profile,
                            const GridPtr& grid, const ProjectionOptions& opts = {}) {
    const Field w = bump_field(xi, params, profile, grid);
    const double s = lp_norm_eps(w, params.p, params.eps, true);
    if (!(s > 0.0)) throw ZeroPositivePart();
    NehariPoint pt = project_nehari(w * (1.0 / s), params, opts);
    pt.t /= s;
    return pt;
}

} // namespace kgm
