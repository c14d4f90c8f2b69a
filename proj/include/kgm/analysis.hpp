/**
 * @file analysis.hpp
 * @brief Post-solve diagnostics: barycenter, peaks, maximum-value margin,
 *        profile residual, concentration and clustering of solutions.
 */
#pragma once

#include "kgm/errors.hpp"
#include "kgm/grid.hpp"
#include "kgm/ground_state.hpp"
#include "kgm/minimizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace kgm {

/**
 * Circular-mean barycenter of the weight (u+)^p, one angle per axis.
 *
 * Throws ZeroPositivePart if u+ vanishes and DegenerateMean if the resultant
 * of some axis has modulus below 1e-12 of the total weight.
 */
inline Point barycenter(const Field& u, double p) {
    const TorusGrid& g = u.grid();
    const std::size_t n = g.n();
    std::vector<double> weight(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) weight[i] = u[i] > 0.0 ? std::pow(u[i], p) : 0.0;
    const double total = pairwise_sum(weight);
    if (!(total > 0.0)) throw ZeroPositivePart();

    Point beta{};
    const double two_pi = 2.0 * std::numbers::pi;
    for (int axis = 0; axis < 3; ++axis) {
        // Marginal weights along the axis, then the resultant of the n phases.
        std::vector<double> marginal(n);
        std::vector<double> slab(n * n);
        for (std::size_t a = 0; a < n; ++a) {
            std::size_t s = 0;
            for (std::size_t b = 0; b < n; ++b)
                for (std::size_t c = 0; c < n; ++c) {
                    const std::size_t idx = axis == 0 ? g.index(a, b, c) : axis == 1 ? g.index(b, a, c) : g.index(b, c, a);
                    slab[s++] = weight[idx];
                }
            marginal[a] = pairwise_sum(slab);
        }
        const double re = pairwise_reduce(0, n, [&](std::size_t a) {
            return marginal[a] * std::cos(two_pi * static_cast<double>(a) / static_cast<double>(n));
        });
        const double im = pairwise_reduce(0, n, [&](std::size_t a) {
            return marginal[a] * std::sin(two_pi * static_cast<double>(a) / static_cast<double>(n));
        });
        if (std::hypot(re, im) < 1e-12 * total)
            throw DegenerateMean("barycenter: circular mean undefined along axis " + std::to_string(axis));
        double angle = std::atan2(im, re);
        if (angle < 0.0) angle += two_pi;
        double x = angle / two_pi * g.length();
        if (x >= g.length()) x -= g.length();
        beta[axis] = x;
    }
    return beta;
}

struct Peak {
    std::size_t index = 0;
    Point position{};
    double value = 0.0;
};

/// Strict 26-neighbour local maxima with value >= rel_threshold * max(u), highest first.
inline std::vector<Peak> find_peaks(const Field& u, double rel_threshold = 0.5) {
    if (!(rel_threshold > 0.0 && rel_threshold < 1.0))
        throw std::invalid_argument("find_peaks: rel_threshold must lie in (0,1)");
    const TorusGrid& g = u.grid();
    const long n = static_cast<long>(g.n());
    const double threshold = rel_threshold * u.max();
    std::vector<Peak> peaks;
    for (std::size_t idx = 0; idx < u.size(); ++idx) {
        const double v = u[idx];
        if (v < threshold) continue;
        const auto m = g.multi_index(idx);
        bool strict = true;
        for (long di = -1; di <= 1 && strict; ++di)
            for (long dj = -1; dj <= 1 && strict; ++dj)
                for (long dk = -1; dk <= 1 && strict; ++dk) {
                    if (di == 0 && dj == 0 && dk == 0) continue;
                    auto wrap = [n](long x) { return static_cast<std::size_t>(((x % n) + n) % n); };
                    const std::size_t nb = g.index(wrap(static_cast<long>(m[0]) + di), wrap(static_cast<long>(m[1]) + dj),
                                                   wrap(static_cast<long>(m[2]) + dk));
                    if (!(u[nb] < v)) strict = false;
                }
        if (strict) peaks.push_back({idx, g.node(idx), v});
    }
    std::sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) {
        return a.value != b.value ? a.value > b.value : a.index < b.index;
    });
    return peaks;
}

/// u(P)^{p-2} - c0 at the global maximum P; positive for genuine solutions.
inline double maxval_certificate(const Field& u, const SystemParams& params) {
    const double top = std::max(u.max(), 0.0);
    return std::pow(top, params.p - 2.0) - params.c0();
}

/// sup |u - W_{eps,peak}|.
inline double profile_residual(const Field& u, const RadialProfile& profile, const SystemParams& params,
                               const Point& peak) {
    const Field w = bump_field(peak, params, profile, u.grid_ptr());
    return sup_norm(u - w);
}

/// eps^-3 times the integral of (u+)^p over the geodesic ball B(center, radius).
inline double mass_in_ball(const Field& u, const Point& center, double radius, const SystemParams& params) {
    const TorusGrid& g = u.grid();
    const double e3 = params.eps * params.eps * params.eps;
    const double sum = pairwise_reduce(0, u.size(), [&](std::size_t i) {
        if (u[i] <= 0.0) return 0.0;
        return torus_distance(g.node(i), center, g) <= radius ? std::pow(u[i], params.p) : 0.0;
    });
    return g.cell_volume() * sum / e3;
}

/// Coefficient of variation (standard deviation over mean) of the samples.
inline double coefficient_of_variation(const Field& u) {
    const double n = static_cast<double>(u.size());
    const double mean = pairwise_sum(u.values()) / n;
    const double var = pairwise_reduce(0, u.size(), [&](std::size_t i) { return (u[i] - mean) * (u[i] - mean); }) / n;
    return std::sqrt(var) / std::abs(mean);
}

inline constexpr Point nan_point() {
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    return {nan, nan, nan};
}

struct SolutionRecord {
    std::size_t seed_id = 0;
    double eps = 0.0;
    SolveStatus status = SolveStatus::Failed;
    std::size_t iterations = 0;
    double energy = std::numeric_limits<double>::quiet_NaN();
    double t_at_projection = std::numeric_limits<double>::quiet_NaN();
    double grad_norm = std::numeric_limits<double>::quiet_NaN();
    double nehari_residual = std::numeric_limits<double>::quiet_NaN();
    Point barycenter = nan_point();
    Point peak_point = nan_point();
    double peak_value = std::numeric_limits<double>::quiet_NaN();
    std::size_t num_peaks = 0;
    double maxval_margin = std::numeric_limits<double>::quiet_NaN();
    double profile_sup_error = std::numeric_limits<double>::quiet_NaN();
    double min_value = std::numeric_limits<double>::quiet_NaN();
    long cluster_id = -1;
    std::string error;

    /// Single peak, positive maximum-value margin and a finite profile residual.
    bool certified() const {
        return num_peaks == 1 && maxval_margin > 0.0 && std::isfinite(profile_sup_error);
    }
};

/// Summarises a solve; every diagnostic that cannot be computed is left NaN.
inline SolutionRecord analyze_solution(const SolveResult& result, const SystemParams& params,
                                       const RadialProfile& profile, double peak_threshold = 0.5) {
    SolutionRecord rec;
    rec.seed_id = result.seed_id;
    rec.eps = params.eps;
    rec.status = result.status;
    rec.iterations = result.iterations;
    rec.error = result.error;
    if (!result.point) return rec;
    const NehariPoint& pt = *result.point;
    rec.energy = pt.energy;
    rec.t_at_projection = pt.t;
    rec.grad_norm = result.grad_norm;
    rec.nehari_residual = pt.nehari_residual;
    rec.min_value = pt.u.min();
    try {
        rec.barycenter = barycenter(pt.u, params.p);
    } catch (const Error&) {
    }
    const auto peaks = find_peaks(pt.u, peak_threshold);
    rec.num_peaks = peaks.size();
    if (!peaks.empty()) {
        rec.peak_point = peaks.front().position;
        rec.peak_value = peaks.front().value;
        rec.maxval_margin = maxval_certificate(pt.u, params);
        rec.profile_sup_error = profile_residual(pt.u, profile, params, rec.peak_point);
    }
    return rec;
}

/**
 * Single-linkage clustering: records are linked when their barycenters are
 * within dist_tol in torus distance and their energies within energy_tol.
 * Cluster ids are dense from 0 in order of first appearance; records without
 * a barycenter or energy form singleton clusters.
 */
inline void cluster_solutions(std::vector<SolutionRecord>& records, const TorusGrid& grid, double dist_tol,
                              double energy_tol) {
    const std::size_t n = records.size();
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    auto valid = [](const SolutionRecord& r) { return std::isfinite(r.energy) && std::isfinite(r.barycenter[0]); };
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            if (!valid(records[i]) || !valid(records[j])) continue;
            if (torus_distance(records[i].barycenter, records[j].barycenter, grid) <= dist_tol &&
                std::abs(records[i].energy - records[j].energy) <= energy_tol) {
                const std::size_t a = find(i), b = find(j);
                if (a != b) parent[std::max(a, b)] = std::min(a, b);
            }
        }
    std::vector<long> id_of_root(n, -1);
    long next = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t root = find(i);
        if (id_of_root[root] < 0) id_of_root[root] = next++;
        records[i].cluster_id = id_of_root[root];
    }
}

inline std::size_t cluster_count(const std::vector<SolutionRecord>& records) {
    long top = -1;
    for (const auto& r : records) top = std::max(top, r.cluster_id);
    return static_cast<std::size_t>(top + 1);
}

} // namespace kgm
