/**
 * @file test_grid.cpp
 * @brief Torus grid, spectral Laplacian, eps-norms and torus geometry.
 */
#include "kgm/grid.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <numbers>
#include <random>
#include <thread>

using namespace kgm;

namespace {

constexpr double pi = std::numbers::pi;

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

} // namespace

TEST(TorusGrid, RejectsInvalidSizes) {
    EXPECT_THROW(TorusGrid(14, 1.0), std::invalid_argument);
    EXPECT_THROW(TorusGrid(17, 1.0), std::invalid_argument);
    EXPECT_THROW(TorusGrid(16, 0.0), std::invalid_argument);
}

TEST(TorusGrid, GeometryInvariants) {
    const auto g = make_grid(16, 3.0);
    EXPECT_EQ(g->size(), 16u * 16u * 16u);
    EXPECT_DOUBLE_EQ(g->spacing(), 3.0 / 16.0);
    EXPECT_EQ(g->injectivity_radius(), 1.5);
    const Point x = g->node(g->index(3, 5, 7));
    EXPECT_DOUBLE_EQ(x[0], 3 * g->spacing());
    EXPECT_DOUBLE_EQ(x[1], 5 * g->spacing());
    EXPECT_DOUBLE_EQ(x[2], 7 * g->spacing());
    EXPECT_EQ(g->nearest_node({-0.01, 3.0, 1.5}), g->index(0, 0, 8));
}

TEST(Field, ArithmeticRequiresSameGrid) {
    const auto a = make_grid(16, 1.0);
    const auto b = make_grid(18, 1.0);
    Field u(a, 1.0), v(b, 1.0);
    EXPECT_THROW(u + v, std::invalid_argument);
    EXPECT_THROW(inner(u, v), std::invalid_argument);
    // distinct grid objects with identical geometry are compatible
    Field w(make_grid(16, 1.0), 2.0);
    EXPECT_NO_THROW(u + w);
}

TEST(Laplacian, ConstantIsHarmonic) {
    const auto g = make_grid(16, 2 * pi);
    const Field u(g, 5.0);
    EXPECT_LE(sup_norm(laplacian(u)), 1e-12);
}

TEST(Laplacian, SingleModeIsExact) {
    const double L = 3.0;
    const auto g = make_grid(24, L);
    const double k = 2 * pi / L;
    const Field u = Field::from_function(g, [&](const Point& x) { return std::sin(k * x[0]); });
    const Field lap = laplacian(u);
    for (std::size_t i = 0; i < u.size(); ++i) EXPECT_NEAR(lap[i], -k * k * u[i], 1e-12);
}

TEST(Laplacian, MatchesFiniteDifferenceToSecondOrder) {
    // Same band-limited function sampled at two resolutions: the FD discrepancy must fall like h^2.
    std::mt19937_64 rng(7);
    const double L = 2 * pi;
    double err[2];
    for (int level = 0; level < 2; ++level) {
        std::mt19937_64 local = rng;
        const auto g = make_grid(level == 0 ? 32 : 64, L);
        const Field u = oracle::random_smooth(g, local, 1.0);
        const Field lap = laplacian(u);
        const auto fd = oracle::fd_laplacian(u);
        err[level] = max_abs_diff(lap.values(), fd);
    }
    EXPECT_GT(err[0], 0.0);
    const double ratio = err[1] / err[0];
    EXPECT_NEAR(ratio, 0.25, 0.03) << "errors " << err[0] << " " << err[1];
}

TEST(Norms, ParsevalAgreesWithRealSpacePairing) {
    std::mt19937_64 rng(11);
    const auto g = make_grid(24, 2.5);
    for (int trial = 0; trial < 5; ++trial) {
        const Field u = oracle::random_smooth(g, rng, 2.0, 0.3, 5, 10);
        const double spectral = gradient_sq_integral(u);
        const double paired = -inner(u, laplacian(u));
        EXPECT_NEAR(spectral, paired, 1e-12 * spectral);
    }
}

TEST(Norms, HepsNormExamples) {
    const double L = 2 * pi;
    const auto g = make_grid(16, L);
    const SystemParams sm = SystemParams::sm(1.0, 1.0, 0.5, 5.0); // c0 = 1
    EXPECT_EQ(h_eps_norm_sq(Field(g), sm), 0.0);

    const SystemParams kgm = SystemParams::kgm(0.5, 2.0, 1.0, 0.5, 4.0);
    const double c = 1.7;
    EXPECT_NEAR(h_eps_norm_sq(Field(g, c), kgm), kgm.c0() * c * c * L * L * L / 0.125, 1e-10);

    const Field s = Field::from_function(g, [&](const Point& x) { return std::sin(2 * pi * x[0] / L); });
    EXPECT_NEAR(h_eps_norm_sq(s, sm), 8.0 * pi * pi * pi, 1e-10);
}

TEST(Norms, GradientTermIsNonNegative) {
    std::mt19937_64 rng(3);
    const auto g = make_grid(16, 2.0);
    const SystemParams p = SystemParams::kgm(0.2, 1.5, 1.0, 0.3, 4.5);
    for (int trial = 0; trial < 10; ++trial) {
        const Field u = oracle::random_smooth(g, rng, 1.0, 0.0, 6, 12);
        EXPECT_GE(h_eps_norm_sq(u, p), p.c0() * inner(u, u) / (0.2 * 0.2 * 0.2) * (1 - 1e-14));
    }
}

TEST(Norms, LpNormExamples) {
    const double L = 2.0;
    const auto g = make_grid(16, L);
    EXPECT_NEAR(lp_norm_eps(Field(g, 1.0), 4.0, 1.0, false), std::pow(L, 0.75), 1e-13);
    EXPECT_EQ(lp_norm_eps(Field(g, -1.0), 4.0, 1.0, true), 0.0);
    EXPECT_THROW(lp_norm_eps(Field(g, 1.0), 0.5, 1.0, false), std::invalid_argument);

    std::mt19937_64 rng(5);
    const Field u = oracle::random_smooth(g, rng, 2.0, 0.2);
    for (double p : {1.0, 2.0, 4.0, 5.5}) {
        for (bool pos : {false, true}) {
            EXPECT_NEAR(lp_norm_eps(u, p, 0.3, pos), oracle::direct_lp(u, p, 0.3, pos),
                        1e-12 * oracle::direct_lp(u, p, 0.3, pos));
        }
    }
    EXPECT_NEAR(std::pow(lp_norm_eps(u, 4.5, 0.3, true), 4.5), positive_power_integral(u, 4.5, 0.3),
                1e-12 * positive_power_integral(u, 4.5, 0.3));
}

TEST(Geometry, WrapDisplacementExamples) {
    const auto g = make_grid(16, 1.0);
    const Point xi{0.9, 0.0, 0.0};
    const Point d0 = wrap_displacement(xi, xi, *g);
    EXPECT_EQ(d0, (Point{0.0, 0.0, 0.0}));
    const Point d = wrap_displacement({0.1, 0.0, 0.0}, xi, *g);
    EXPECT_NEAR(d[0], 0.2, 1e-15);
    EXPECT_EQ(d[1], 0.0);
    EXPECT_EQ(d[2], 0.0);
}

TEST(Geometry, WrapDisplacementMatchesTranslateEnumeration) {
    const double L = 2.7;
    const auto g = make_grid(16, L);
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> uni(0.0, L);
    for (int trial = 0; trial < 1000; ++trial) {
        const Point x{uni(rng), uni(rng), uni(rng)}, y{uni(rng), uni(rng), uni(rng)};
        const Point d = wrap_displacement(x, y, *g);
        for (double c : d) {
            EXPECT_GE(c, -L / 2);
            EXPECT_LT(c, L / 2);
        }
        EXPECT_LE(norm3(d), std::sqrt(3.0) / 2 * L);
        EXPECT_NEAR(norm3(d), oracle::brute_distance(x, y, L), 1e-12);
        const Point e = wrap_displacement(y, x, *g);
        for (int c = 0; c < 3; ++c) EXPECT_NEAR(d[c], -e[c], 1e-12);
    }
}

TEST(Geometry, TranslateIsCyclicShift) {
    const auto g = make_grid(16, 1.0);
    std::mt19937_64 rng(2);
    const Field u = oracle::random_smooth(g, rng, 1.0);
    const Field t = translate(u, {3, -2, 17});
    EXPECT_EQ(t[g->index(3, 14, 1)], u[g->index(0, 0, 0)]);
    const Field back = translate(t, {-3, 2, -17});
    EXPECT_EQ(std::memcmp(back.values().data(), u.values().data(), u.size() * sizeof(double)), 0);
}

TEST(Determinism, ReductionsAreBitIdenticalAcrossThreads) {
    const auto g = make_grid(32, 2 * pi);
    std::mt19937_64 rng(17);
    const Field u = oracle::random_smooth(g, rng, 3.0, 0.5, 4, 20);
    const SystemParams p = SystemParams::kgm(0.3, 2.0, 1.0, 0.5, 4.0);
    const double ref_norm = h_eps_norm_sq(u, p);
    const double ref_inner = inner(u, u);
    const double ref_lp = lp_norm_eps(u, 4.0, 0.3, true);
    std::vector<std::array<double, 3>> got(4);
    std::vector<std::thread> pool;
    for (int w = 0; w < 4; ++w)
        pool.emplace_back([&, w] { got[w] = {h_eps_norm_sq(u, p), inner(u, u), lp_norm_eps(u, 4.0, 0.3, true)}; });
    for (auto& t : pool) t.join();
    for (const auto& v : got) {
        EXPECT_EQ(v[0], ref_norm);
        EXPECT_EQ(v[1], ref_inner);
        EXPECT_EQ(v[2], ref_lp);
    }
}

TEST(SystemParams, Validation) {
    EXPECT_NO_THROW(SystemParams::kgm(0.1, 2.0, 1.0, 0.5, 4.0).validate());
    EXPECT_THROW(SystemParams::kgm(0.1, 0.2, 1.0, 0.5, 4.0).validate(), std::invalid_argument); // omega^2 >= a
    EXPECT_THROW(SystemParams::kgm(0.1, 2.0, 1.0, 0.5, 6.0).validate(), std::invalid_argument);
    EXPECT_THROW(SystemParams::kgm(0.1, 2.0, 1.0, 0.5, 3.5).validate(), std::invalid_argument);
    EXPECT_THROW(SystemParams::sm(0.1, 1.0, 0.5, 4.0).validate(), std::invalid_argument); // SM needs p > 4
    EXPECT_THROW(SystemParams::sm(0.1, 1.0, -0.5, 5.0).validate(), std::invalid_argument);
    EXPECT_THROW(SystemParams::sm(0.0, 1.0, 0.5, 5.0).validate(), std::invalid_argument);
    EXPECT_THROW(SystemParams::sm(0.1, 0.0, 0.5, 5.0).validate(), std::invalid_argument);
    EXPECT_EQ(SystemParams::sm(0.1, 1.0, 0.5, 5.0).c0(), 1.0);
    EXPECT_DOUBLE_EQ(SystemParams::kgm(0.1, 2.0, 1.0, 0.5, 4.0).c0(), 1.75);
}
