/**
 * @file test_energy.cpp
 * @brief Functional, first variation, Nehari residual, fiber projection and seeds.
 */
#include "kgm/energy.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <numbers>
#include <random>

using namespace kgm;

namespace {

constexpr double pi = std::numbers::pi;

const SystemParams kgm_params = SystemParams::kgm(0.6, 2.0, 1.2, 0.7, 4.5);
const SystemParams sm_params = SystemParams::sm(0.6, 0.9, 0.8, 5.0);

/// I(u) with psi solved tightly.
double energy_of(const Field& u, const SystemParams& params) {
    return energy(u, solve_psi(u, params, 1e-14), params);
}

/// A projected random point: positive-leaning smooth field, normalized, projected.
NehariPoint random_projected(const GridPtr& g, std::mt19937_64& rng, const SystemParams& params) {
    const Field u = oracle::random_smooth(g, rng, 2.0, 0.5);
    return project_nehari(normalize_positive_part(u, params), params);
}

} // namespace

TEST(Energy, ZeroField) {
    const auto g = make_grid(16, 2 * pi);
    for (const auto& params : {kgm_params, sm_params}) {
        const Field z(g);
        EXPECT_EQ(energy(z, solve_psi(z, params), params), 0.0);
        EXPECT_EQ(nehari_residual(z, solve_psi(z, params), params), 0.0);
    }
}

TEST(Energy, KgmConstantClosedForm) {
    const double L = 2 * pi;
    const auto g = make_grid(16, L);
    const double c = 1.3, a = kgm_params.a, q = kgm_params.q, w = kgm_params.omega, p = kgm_params.p;
    const double e = kgm_params.eps;
    const double vol = L * L * L / (e * e * e);
    const double expected = 0.5 * (a - w * w) * c * c * vol + 0.5 * w * w * (q * q * c * c * c * c / (1 + q * q * c * c)) * vol -
                            std::pow(c, p) / p * vol;
    EXPECT_NEAR(energy_of(Field(g, c), kgm_params), expected, 1e-11 * std::abs(expected));
}

TEST(Energy, NehariTwoFormsAgreeOnProjectedPoints) {
    std::mt19937_64 rng(41);
    const auto g = make_grid(16, 2 * pi);
    for (const auto& params : {kgm_params, sm_params}) {
        for (int trial = 0; trial < 5; ++trial) {
            const NehariPoint pt = random_projected(g, rng, params);
            const auto [by_norm, by_power] = nehari_energy_forms(pt.u, pt.psi, params);
            EXPECT_NEAR(by_norm, by_power, 1e-8 * std::abs(by_norm));
            EXPECT_NEAR(by_norm, pt.energy, 1e-8 * std::abs(by_norm));
        }
    }
}

TEST(Gradient, VanishesAtKgmConstantEquilibrium) {
    const auto g = make_grid(16, 2 * pi);
    const double c = oracle::kgm_constant_equilibrium(kgm_params.a, kgm_params.q, kgm_params.omega, kgm_params.p);
    const Field u(g, c);
    const Field r = gradient(u, solve_psi(u, kgm_params, 1e-14), kgm_params);
    EXPECT_LE(sup_norm(r), 1e-12 * std::pow(c, kgm_params.p - 1.0));
}

TEST(Gradient, MatchesCentralDifferenceOfEnergy) {
    std::mt19937_64 rng(43);
    const auto g = make_grid(16, 2 * pi);
    const double d = 1e-4;
    for (const auto& params : {kgm_params, sm_params}) {
        const double e3 = params.eps * params.eps * params.eps;
        for (int trial = 0; trial < 5; ++trial) {
            const Field u = oracle::random_smooth(g, rng, 2.0, 0.5);
            const Field h = oracle::random_smooth(g, rng, 1.0);
            const double analytic = inner(gradient(u, solve_psi(u, params, 1e-14), params), h) / e3;
            const double fd = (energy_of(u + h * d, params) - energy_of(u - h * d, params)) / (2 * d);
            EXPECT_LE(std::abs(analytic - fd), 1e-4 * std::abs(analytic)) << to_string(params.system);
        }
    }
}

TEST(Gradient, NonPositiveFieldGivesLinearResidual) {
    std::mt19937_64 rng(44);
    const auto g = make_grid(16, 2 * pi);
    Field u = oracle::random_smooth(g, rng, 1.0);
    for (double& v : u.values()) v = -std::abs(v);
    for (const auto& params : {kgm_params, sm_params}) {
        const Field psi = solve_psi(u, params);
        const Field r = gradient(u, psi, params);
        const Field lap = laplacian(u);
        const double e2 = params.eps * params.eps, q = params.q, w = params.omega;
        for (std::size_t i = 0; i < u.size(); ++i) {
            const double coeff = params.system == SystemKind::KGM ? params.a - w * w * (1 - q * psi[i]) * (1 - q * psi[i])
                                                                  : 1 + w * psi[i];
            ASSERT_NEAR(r[i], -e2 * lap[i] + coeff * u[i], 1e-13);
        }
    }
}

TEST(Gradient, PreconditionedNormIsDualNorm) {
    // ||g||_eps^2 with g = (eps^2(-Lap)+c0)^{-1} R equals eps^-3 int R g and ||g||_eps^2 itself.
    std::mt19937_64 rng(45);
    const auto g = make_grid(16, 2 * pi);
    const Field u = oracle::random_smooth(g, rng, 2.0, 0.5);
    const Field r = gradient(u, solve_psi(u, kgm_params), kgm_params);
    const Field riesz = preconditioned_gradient(r, kgm_params);
    const double gn = gradient_norm(r, riesz, kgm_params);
    EXPECT_NEAR(gn * gn, h_eps_norm_sq(riesz, kgm_params), 1e-12 * gn * gn);
}

TEST(Nehari, ResidualIsGradientPairedWithField) {
    std::mt19937_64 rng(46);
    const auto g = make_grid(16, 2 * pi);
    for (const auto& params : {kgm_params, sm_params}) {
        const double e3 = params.eps * params.eps * params.eps;
        for (int trial = 0; trial < 10; ++trial) {
            const Field u = oracle::random_smooth(g, rng, 3.0, trial % 2 ? 0.5 : -0.2);
            const Field psi = solve_psi(u, params);
            const double pairing = inner(gradient(u, psi, params), u) / e3;
            const double n = nehari_residual(u, psi, params);
            const double scale = h_eps_norm_sq(u, params) + positive_power_integral(u, params.p, params.eps);
            EXPECT_NEAR(n, pairing, 1e-12 * scale);
        }
    }
}

TEST(Projection, DecoupledClosedForm) {
    std::mt19937_64 rng(47);
    const auto g = make_grid(16, 2 * pi);
    const SystemParams free = SystemParams::kgm(0.6, 2.0, 1.0, 0.0, 4.5);
    for (int trial = 0; trial < 5; ++trial) {
        const Field u = normalize_positive_part(oracle::random_smooth(g, rng, 2.0, 0.5), free);
        const NehariPoint pt = project_nehari(u, free);
        const double expected = std::pow(h_eps_norm_sq(u, free), 1.0 / (free.p - 2.0));
        EXPECT_NEAR(pt.t, expected, 1e-10 * expected);
        EXPECT_LT(pt.h_second, 0.0);
    }
}

TEST(Projection, ResidualConcavityAndPositivity) {
    std::mt19937_64 rng(48);
    const auto g = make_grid(16, 2 * pi);
    for (const auto& params : {kgm_params, sm_params}) {
        for (int trial = 0; trial < 10; ++trial) {
            const NehariPoint pt = random_projected(g, rng, params);
            EXPECT_LE(std::abs(pt.nehari_residual), 1e-8 * std::max(1.0, pt.norm_sq));
            EXPECT_LT(pt.h_second, 0.0);
            EXPECT_GT(pt.energy, 0.0);
            EXPECT_GT(pt.t, 0.0);
            // The stored psi belongs to the projected field.
            EXPECT_LE(sup_norm(pt.psi - solve_psi(pt.u, params, 1e-13)), 1e-9);
        }
    }
}

TEST(Projection, HsecondMatchesFiberFiniteDifference) {
    // H(t) = I(t u) for the normalized direction u.
    std::mt19937_64 rng(49);
    const auto g = make_grid(16, 2 * pi);
    for (const auto& params : {kgm_params, sm_params}) {
        const Field u = normalize_positive_part(oracle::random_smooth(g, rng, 2.0, 0.5), params);
        const NehariPoint pt = project_nehari(u, params);
        const double t = pt.t, d = 1e-3 * t;
        auto H = [&](double s) { return energy_of(u * s, params); };
        const double second = (H(t + d) - 2 * H(t) + H(t - d)) / (d * d);
        EXPECT_NEAR(second, pt.h_second, 1e-4 * std::abs(pt.h_second)) << to_string(params.system);
    }
}

TEST(Projection, ZeroPositivePart) {
    const auto g = make_grid(16, 2 * pi);
    EXPECT_THROW(project_nehari(Field(g, -1.0), kgm_params), ZeroPositivePart);
    EXPECT_THROW(normalize_positive_part(Field(g), kgm_params), ZeroPositivePart);
}

TEST(Projection, SmConstantMatchesDenseScan) {
    const double L = 2 * pi;
    const auto g = make_grid(16, L);
    const SystemParams params = SystemParams::sm(0.6, 0.9, 2.5, 5.0);
    const double e3 = params.eps * params.eps * params.eps, vol = L * L * L / e3;
    const double c = std::pow(1.0 / vol, 1.0 / params.p); // |c|_{eps,p} = 1
    const Field u(g, c);
    // closed form: t^{p-2} = A + B t^2 with A = c^2 vol, B = omega q c^4 vol
    const double A = c * c * vol, B = params.omega * params.q * c * c * c * c * vol;
    auto gfun = [&](double t) { return std::pow(t, params.p - 2.0) - A - B * t * t; };
    double lo = 0, hi = 0;
    double prev = gfun(1e-3);
    for (int i = 1; i <= 200000; ++i) {
        const double t = 1e-3 * std::pow(10.0, 8.0 * i / 200000.0);
        const double cur = gfun(t);
        if (prev < 0 && cur >= 0) {
            lo = 1e-3 * std::pow(10.0, 8.0 * (i - 1) / 200000.0);
            hi = t;
            break;
        }
        prev = cur;
    }
    ASSERT_GT(hi, 0.0);
    for (int it = 0; it < 200; ++it) (gfun(0.5 * (lo + hi)) < 0 ? lo : hi) = 0.5 * (lo + hi);
    const NehariPoint pt = project_nehari(u, params);
    EXPECT_NEAR(pt.t, 0.5 * (lo + hi), 1e-10 * pt.t);
}

TEST(Projection, SmQuarticReportsNoRoot) {
    // At p = 4 the SM fiber equation t^2 (P - B) = A has no root once the coupling B exceeds P.
    const auto g = make_grid(16, 2 * pi);
    SystemParams params = SystemParams::sm(0.6, 1.0, 50.0, 4.0);
    std::mt19937_64 rng(50);
    const Field u = normalize_positive_part(oracle::random_smooth(g, rng, 2.0, 0.5), params);
    EXPECT_THROW(project_nehari(u, params), NoRoot);
}

TEST(Projection, NehariFloorIsStable) {
    std::mt19937_64 rng(51);
    const auto g = make_grid(16, 2 * pi);
    double floor[2] = {1e300, 1e300};
    for (int batch = 0; batch < 2; ++batch)
        for (int trial = 0; trial < 50; ++trial)
            floor[batch] = std::min(floor[batch], random_projected(g, rng, kgm_params).norm_sq);
    EXPECT_GT(floor[0], 0.0);
    EXPECT_GT(floor[1], 0.0);
    EXPECT_LT(std::max(floor[0], floor[1]) / std::min(floor[0], floor[1]), 2.0);
}

TEST(Seeds, TranslationInvariantEnergy) {
    const double L = 2 * pi;
    const auto g = make_grid(32, L);
    const RadialProfile prof = shoot_ground_state(1.75, 4.0);
    const SystemParams params = SystemParams::kgm(L / 12, 2.0, 1.0, 0.5, 4.0);
    const Point xi{0.3, 1.1, 2.05};
    const NehariPoint a = phi_seed(xi, params, prof, g);
    for (const std::array<long, 3> s : {std::array<long, 3>{3, 0, 0}, {5, -7, 11}, {16, 16, 16}}) {
        Point moved = xi;
        for (int c = 0; c < 3; ++c) moved[c] += static_cast<double>(s[c]) * g->spacing();
        const NehariPoint b = phi_seed(wrap_point(moved, *g), params, prof, g);
        EXPECT_NEAR(a.energy, b.energy, 1e-6 * a.energy);
        EXPECT_NEAR(a.t, b.t, 1e-9);
    }
}

TEST(Seeds, AsymptoticsOnResolvedGrids) {
    // eps = r/8 on n = 96 and r/16 on n = 192 keep h/eps = 1/6, where the bump is resolved.
    const double L = 2 * pi;
    const RadialProfile prof = shoot_ground_state(1.75, 4.0);
    const std::array<std::size_t, 2> sizes{96, 192};
    const std::array<Point, 2> xis{Point{L / 4, L / 4, L / 4}, Point{0.3, 1.1, 2.05}};
    double t_dev[2] = {0, 0}, e_dev[2] = {0, 0}, coupling[2] = {0, 0};
    for (int level = 0; level < 2; ++level) {
        const auto g = make_grid(sizes[level], L);
        const SystemParams params = SystemParams::kgm(g->injectivity_radius() / (8 << level), 2.0, 1.0, 0.5, 4.0);
        for (const Point& xi : xis) {
            const NehariPoint pt = phi_seed(xi, params, prof, g);
            EXPECT_GT(pt.t, 0.8);
            EXPECT_LT(pt.t, 1.25);
            t_dev[level] = std::max(t_dev[level], std::abs(pt.t - 1.0));
            e_dev[level] = std::max(e_dev[level], pt.energy - prof.m_inf);
            const EnergyTerms terms = energy_terms(pt.u, pt.psi, params);
            coupling[level] = std::max(coupling[level], params.q * terms.coupling);
        }
    }
    EXPECT_LT(t_dev[1], t_dev[0]);
    EXPECT_LT(e_dev[1], e_dev[0]);
    EXPECT_GT(e_dev[1], 0.0);
    EXPECT_LT(coupling[1], coupling[0]);
}
