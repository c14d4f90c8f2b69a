/**
 * @file minimizer.hpp
 * @brief Nehari-constrained preconditioned descent and multi-start driver.
 *
 * Each step moves along the H_eps-Riesz representative of I'_eps, rescales
 * so that |u+|_{eps,p} = 1 and projects back onto the Nehari set. Step
 * lengths are chosen by Armijo backtracking on the projected energy.
 */
#pragma once

#include "kgm/energy.hpp"
#include "kgm/errors.hpp"
#include "kgm/grid.hpp"
#include "kgm/ground_state.hpp"

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdio>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace kgm {

enum class SolveStatus { Converged, MaxIters, Collapsed, Failed };

inline const char* to_string(SolveStatus s) {
    switch (s) {
    case SolveStatus::Converged: return "Converged";
    case SolveStatus::MaxIters: return "MaxIters";
    case SolveStatus::Collapsed: return "Collapsed";
    case SolveStatus::Failed: return "Failed";
    }
    return "Unknown";
}

struct SolveOptions {
    std::size_t max_iters = 500;
    double grad_tol = 1e-8;     ///< threshold on the preconditioned gradient eps-norm
    double step0 = 1.0;         ///< initial step of every line search
    double backtrack = 0.5;     ///< step reduction factor
    double armijo = 1e-4;       ///< sufficient-decrease constant
    double energy_slack = 1e-13; ///< relative round-off allowance in the Armijo test
    std::size_t max_backtracks = 40;
    std::size_t seed_id = 0;
    double rho0 = 0.0;          ///< Nehari floor; 0 disables the collapse check
    ProjectionOptions projection{};
    std::ostream* log = nullptr; ///< per-iteration trace when non-null
    std::function<void(const NehariPoint&)> on_iterate; ///< called with every accepted iterate

    void validate() const {
        if (max_iters < 1) throw std::invalid_argument("SolveOptions: max_iters must be >= 1");
        if (!(grad_tol > 0.0)) throw std::invalid_argument("SolveOptions: grad_tol must be positive");
        if (!(step0 > 0.0)) throw std::invalid_argument("SolveOptions: step0 must be positive");
        if (!(backtrack > 0.0 && backtrack < 1.0))
            throw std::invalid_argument("SolveOptions: backtrack must lie in (0,1)");
        if (!(rho0 >= 0.0)) throw std::invalid_argument("SolveOptions: rho0 must be nonnegative");
    }
};

struct SolveResult {
    std::optional<NehariPoint> point;      ///< empty only for Failed results
    std::size_t seed_id = 0;
    std::size_t iterations = 0;
    SolveStatus status = SolveStatus::Failed;
    double grad_norm = std::numeric_limits<double>::quiet_NaN();
    double rho0 = 0.0;
    std::vector<double> grad_norm_history; ///< gradient norm at every accepted iterate, seed first
    std::vector<double> energy_history;    ///< energy at every accepted iterate, seed first
    std::string error;                     ///< diagnostic for Failed results
};

namespace detail {

inline void log_iteration(std::ostream* os, std::size_t iter, double energy, double grad_norm, double t,
                          double step) {
    if (!os) return;
    char line[160];
    std::snprintf(line, sizeof line, "%zu %.17g %.17g %.17g %.17g\n", iter, energy, grad_norm, t, step);
    *os << line;
}

} // namespace detail

/**
 * Descends from a Nehari point. Converged means the full preconditioned
 * gradient at the current projected point has eps-norm <= grad_tol.
 *
 * The reported point.t is the scalar the last projection applied to the
 * field handed to it (1 at a fixed point; the seed's own t if no step was
 * taken).
 */
inline SolveResult minimize(const NehariPoint& seed, const SystemParams& params, const SolveOptions& opts) {
    opts.validate();
    SolveResult res;
    res.seed_id = opts.seed_id;
    res.rho0 = opts.rho0;
    res.point = seed;

    NehariPoint& cur = *res.point;
    Field residual = gradient(cur.u, cur.psi, params);
    Field dir = preconditioned_gradient(residual, params);
    double gn = gradient_norm(residual, dir, params);
    res.grad_norm_history.push_back(gn);
    res.energy_history.push_back(cur.energy);
    detail::log_iteration(opts.log, 0, cur.energy, gn, cur.t, 0.0);

    for (;;) {
        res.grad_norm = gn;
        if (gn <= opts.grad_tol) {
            res.status = SolveStatus::Converged;
            return res;
        }
        if (opts.rho0 > 0.0 && cur.norm_sq < 0.5 * opts.rho0) {
            res.status = SolveStatus::Collapsed;
            return res;
        }
        if (res.iterations >= opts.max_iters) {
            res.status = SolveStatus::MaxIters;
            return res;
        }

        const double slack = opts.energy_slack * std::max(1.0, std::abs(cur.energy));
        double step = opts.step0;
        bool accepted = false;
        std::optional<NehariPoint> trial;
        for (std::size_t b = 0; b <= opts.max_backtracks; ++b, step *= opts.backtrack) {
            Field v = cur.u;
            v.axpy(-step, dir);
            const double s = lp_norm_eps(v, params.p, params.eps, true);
            if (!(s > 0.0)) continue;
            trial = project_nehari(v * (1.0 / s), params, opts.projection, &cur.psi);
            trial->t /= s;
            if (trial->energy <= cur.energy - opts.armijo * step * gn * gn + slack) {
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            // No step decreases the energy beyond round-off: the descent has stalled.
            res.status = SolveStatus::MaxIters;
            return res;
        }

        ++res.iterations;
        cur = std::move(*trial);
        residual = gradient(cur.u, cur.psi, params);
        dir = preconditioned_gradient(residual, params);
        gn = gradient_norm(residual, dir, params);
        res.grad_norm_history.push_back(gn);
        res.energy_history.push_back(cur.energy);
        detail::log_iteration(opts.log, res.iterations, cur.energy, gn, cur.t, step);
        if (opts.on_iterate) opts.on_iterate(cur);
    }
}

/**
 * minimize(phi_seed(xi)) for every xi, results in input order.
 *
 * The Nehari floor rho0 is half the smallest seed norm unless opts.rho0 is
 * already set. Per-seed failures are captured as SolveStatus::Failed and
 * never abort the batch. Seeds run on `workers` threads (0 means hardware
 * concurrency); the output does not depend on the schedule.
 */
inline std::vector<SolveResult> multi_start(const std::vector<Point>& xis, const SystemParams& params,
                                            const RadialProfile& profile, const GridPtr& grid,
                                            const SolveOptions& opts, unsigned workers = 1) {
    opts.validate();
    const std::size_t count = xis.size();
    std::vector<SolveResult> results(count);
    std::vector<std::optional<NehariPoint>> seeds(count);

    auto run_parallel = [&](auto&& task) {
        unsigned nw = workers == 0 ? std::max(1u, std::thread::hardware_concurrency()) : workers;
        nw = static_cast<unsigned>(std::min<std::size_t>(nw, count));
        std::atomic<std::size_t> next{0};
        auto loop = [&] {
            for (std::size_t i = next++; i < count; i = next++) task(i);
        };
        if (nw <= 1) {
            loop();
            return;
        }
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < nw; ++w) pool.emplace_back(loop);
        for (auto& th : pool) th.join();
    };

    auto fail = [&](std::size_t i, const std::string& what) {
        results[i].seed_id = opts.seed_id + i;
        results[i].status = SolveStatus::Failed;
        results[i].error = what;
    };

    run_parallel([&](std::size_t i) {
        try {
            seeds[i] = phi_seed(xis[i], params, profile, grid, opts.projection);
        } catch (const std::exception& e) {
            fail(i, e.what());
        }
    });

    double rho0 = opts.rho0;
    if (rho0 == 0.0) {
        double min_norm = std::numeric_limits<double>::infinity();
        for (const auto& s : seeds)
            if (s) min_norm = std::min(min_norm, s->norm_sq);
        if (std::isfinite(min_norm)) rho0 = 0.5 * min_norm;
    }

    run_parallel([&](std::size_t i) {
        if (!seeds[i]) return;
        SolveOptions o = opts;
        o.seed_id = opts.seed_id + i;
        o.rho0 = rho0;
        if (workers != 1) {
            o.log = nullptr;
            o.on_iterate = nullptr;
        }
        try {
            results[i] = minimize(*seeds[i], params, o);
        } catch (const std::exception& e) {
            fail(i, e.what());
            results[i].rho0 = rho0;
        }
    });
    return results;
}

} // namespace kgm
