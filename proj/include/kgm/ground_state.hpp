/**
 * @file ground_state.hpp
 * @brief Radial ground state of -Delta U + c0 U = U^{p-1} in R^3, its limit
 *        energy, and the cut-off bumps W_{eps,xi} transplanted onto the torus.
 *
 * The ground state is found by shooting on U(0): trajectories that start too
 * low turn back before reaching zero, trajectories that start too high cross
 * zero, and bisection converges on the separatrix. Once the shot trajectory
 * has decayed by six orders of magnitude it is spliced onto the linear tail
 * A e^{-sqrt(c0) r} / r, which it matches to the accuracy of the shot.
 */
#pragma once

#include "kgm/errors.hpp"
#include "kgm/grid.hpp"

#include <math.h> // pchip.hpp calls unqualified isnan

#include <boost/math/interpolators/pchip.hpp>
#include <boost/numeric/odeint.hpp>

#include <array>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <memory>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace kgm {

/**
 * Ground state sampled on a uniform radial mesh.
 *
 * du_samples holds U'(r) when the profile came straight from the shooting
 * solve; profiles read back from text carry only (r, U) and leave it empty.
 */
struct RadialProfile {
    double c0 = 1.0;
    double p = 4.0;
    double tol = 1e-10;
    double r_max = 0.0;
    std::vector<double> r_samples;
    std::vector<double> u_samples;
    std::vector<double> du_samples;
    double u0 = 0.0;
    double m_inf = 0.0;
    double decay_rate = 0.0;
    double tail_amplitude = 0.0;

    /// Builds the monotone cubic interpolant; call after filling the samples.
    void finalize() {
        if (r_samples.size() < 4 || r_samples.size() != u_samples.size())
            throw std::invalid_argument("RadialProfile: inconsistent samples");
        auto x = r_samples;
        auto y = u_samples;
        interp_ = std::make_shared<const Interp>(std::move(x), std::move(y), 0.0);
    }

    /// U(r) for r >= 0; monotone cubic inside the mesh, fitted tail beyond.
    double value(double r) const {
        if (r <= r_max) return (*interp_)(r);
        if (!(tail_amplitude > 0.0) || !std::isfinite(tail_amplitude))
            throw ProfileRangeError("radial argument beyond r_max and the profile has no usable tail");
        return tail_amplitude * std::exp(-std::sqrt(c0) * r) / r;
    }

    double derivative(double r) const {
        if (r <= r_max) return interp_->prime(r);
        const double k = std::sqrt(c0);
        return -tail_amplitude * std::exp(-k * r) * (k * r + 1.0) / (r * r);
    }

    double spacing() const { return r_samples[1] - r_samples[0]; }

  private:
    using Interp = boost::math::interpolators::pchip<std::vector<double>>;
    std::shared_ptr<const Interp> interp_;
};

struct ShootingOptions {
    /// Radial sample spacing in units of 1/sqrt(c0).
    double spacing = 0.005;
    /// Relative/absolute tolerance of the embedded Runge-Kutta pair.
    double rk_tol = 1e-12;
    /// Resolution multiplier: divides the spacing and tightens rk_tol by 2^(5 (refinement-1)).
    int refinement = 1;
    /// The shot trajectory is replaced by the analytic tail once U < splice_fraction * U(0).
    double splice_fraction = 1e-6;
};

namespace detail {

using RadialState = std::array<double, 2>;

struct RadialOde {
    double c0;
    double p;
    void operator()(const RadialState& x, RadialState& dxdr, double r) const {
        const double u = x[0];
        const double nonlinear = u > 0.0 ? std::pow(u, p - 1.0) : -std::pow(-u, p - 1.0);
        dxdr[0] = x[1];
        dxdr[1] = c0 * u - nonlinear - 2.0 * x[1] / r;
    }
};

/// Series start U(r) = U0 + b r^2/6, b = c0 U0 - U0^{p-1}, regularising the 2U'/r term.
inline RadialState series_start(double u0, double c0, double p, double r) {
    const double b = c0 * u0 - std::pow(u0, p - 1.0);
    return {u0 + b * r * r / 6.0, b * r / 3.0};
}

using Stepper = boost::numeric::odeint::runge_kutta_dopri5<RadialState>;

inline auto make_stepper(double tol) { return boost::numeric::odeint::make_controlled<Stepper>(tol, tol); }

enum class Fate { Undershoot, Overshoot };

/// Overshoot: U crosses zero. Undershoot: U' turns positive first (or never leaves equilibrium).
inline Fate classify(double u0, double c0, double p, double tol, double r_limit) {
    const RadialOde ode{c0, p};
    auto stepper = make_stepper(tol);
    double r = 1e-4 / std::sqrt(c0);
    RadialState x = series_start(u0, c0, p, r);
    double dr = 1e-3 / std::sqrt(c0);
    int failures = 0;
    while (r < r_limit) {
        if (stepper.try_step(ode, x, r, dr) == boost::numeric::odeint::fail) {
            if (++failures > 1000 || dr < 1e-14) throw ResolutionError("shooting: step size underflow");
            continue;
        }
        failures = 0;
        dr = std::min(dr, 0.1 / std::sqrt(c0));
        if (x[0] < 0.0) return Fate::Overshoot;
        if (x[1] > 0.0) return Fate::Undershoot;
    }
    return Fate::Undershoot;
}

/// Integrates from r0 to r1 exactly, adapting the step inside.
template <class Controlled>
void advance(Controlled& stepper, const RadialOde& ode, RadialState& x, double& r, double r1, double& dr) {
    int failures = 0;
    while (r < r1) {
        double step = std::min(dr, r1 - r);
        const bool last = step >= r1 - r;
        double r_new = r;
        if (stepper.try_step(ode, x, r_new, step) == boost::numeric::odeint::fail) {
            dr = step;
            if (++failures > 1000 || dr < 1e-14) throw ResolutionError("shooting: step size underflow");
            continue;
        }
        failures = 0;
        r = last ? r1 : r_new;
        if (!last) dr = step;
    }
}

/// Composite Simpson rule on a uniform mesh with an even number of intervals.
inline double simpson(const std::vector<double>& f, double h) {
    const std::size_t m = f.size() - 1;
    double s = f.front() + f[m];
    for (std::size_t i = 1; i < m; ++i) s += (i % 2 == 1 ? 4.0 : 2.0) * f[i];
    return s * h / 3.0;
}

} // namespace detail

/// 4 pi int_0^{r_max} f(r, U, U') r^2 dr over the profile mesh.
template <class F>
double radial_integral(const RadialProfile& profile, const F& f) {
    const auto& r = profile.r_samples;
    std::vector<double> vals(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) {
        const double du = profile.du_samples.empty() ? profile.derivative(r[i]) : profile.du_samples[i];
        vals[i] = f(r[i], profile.u_samples[i], du) * r[i] * r[i];
    }
    return 4.0 * std::numbers::pi * detail::simpson(vals, profile.spacing());
}

/// int |grad U|^2 + c0 U^2 over R^3.
inline double limit_norm_sq(const RadialProfile& profile) {
    return radial_integral(profile, [&](double, double u, double du) { return du * du + profile.c0 * u * u; });
}

/// int U^t over R^3.
inline double limit_power_integral(const RadialProfile& profile, double t) {
    return radial_integral(profile, [&](double, double u, double) { return std::pow(u, t); });
}

/// m_inf = (1/2 - 1/p) int |grad U|^2 + c0 U^2, the ground-state energy on the limit Nehari set.
inline double m_infinity(const RadialProfile& profile) {
    return (0.5 - 1.0 / profile.p) * limit_norm_sq(profile);
}

/// Smallest radius whose ball carries `fraction` of int U^p.
inline double mass_radius(const RadialProfile& profile, double fraction) {
    const auto& r = profile.r_samples;
    std::vector<double> cumulative(r.size(), 0.0);
    auto density = [&](std::size_t i) { return std::pow(profile.u_samples[i], profile.p) * r[i] * r[i]; };
    for (std::size_t i = 1; i < r.size(); ++i)
        cumulative[i] = cumulative[i - 1] + 0.5 * (density(i - 1) + density(i)) * (r[i] - r[i - 1]);
    const double target = fraction * cumulative.back();
    for (std::size_t i = 1; i < r.size(); ++i)
        if (cumulative[i] >= target) {
            const double w = (target - cumulative[i - 1]) / (cumulative[i] - cumulative[i - 1]);
            return r[i - 1] + w * (r[i] - r[i - 1]);
        }
    return r.back();
}

/**
 * Shoots the positive radial ground state of U'' + (2/r)U' = c0 U - U^{p-1}.
 *
 * @param tol    the returned profile satisfies U(r_max) < tol * U(0)
 * @param r_max  outer radius of the sampled mesh; 0 picks sqrt(c0) r_max = 40,
 *               enlarged if needed to meet tol
 */
inline RadialProfile shoot_ground_state(double c0, double p, double tol = 1e-10, double r_max = 0.0,
                                        const ShootingOptions& opts = {}) {
    if (!(c0 > 0.0)) throw std::invalid_argument("shoot_ground_state: c0 must be positive");
    if (!(p >= 4.0 && p < 6.0)) throw std::invalid_argument("shoot_ground_state: requires 4 <= p < 6");
    if (!(tol > 0.0)) throw std::invalid_argument("shoot_ground_state: tol must be positive");
    if (opts.refinement < 1) throw std::invalid_argument("shoot_ground_state: refinement must be >= 1");

    const double k = std::sqrt(c0);
    const double rk_tol = opts.rk_tol * std::pow(2.0, -5.0 * (opts.refinement - 1));
    const double r_limit = 120.0 / k;

    // Bracket: the constant equilibrium never reaches zero; double the upper end until it overshoots.
    double lo = std::pow(c0, 1.0 / (p - 2.0));
    if (detail::classify(lo, c0, p, rk_tol, r_limit) != detail::Fate::Undershoot)
        throw BracketNotFound("shooting: equilibrium start does not undershoot");
    double hi = 2.0 * lo;
    int doublings = 0;
    while (detail::classify(hi, c0, p, rk_tol, r_limit) != detail::Fate::Overshoot) {
        lo = hi;
        hi *= 2.0;
        if (++doublings > 60) throw BracketNotFound("shooting: no overshooting start found");
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = lo + 0.5 * (hi - lo);
        if (mid <= lo || mid >= hi) break;
        (detail::classify(mid, c0, p, rk_tol, r_limit) == detail::Fate::Overshoot ? hi : lo) = mid;
    }

    const double dr = opts.spacing / k / opts.refinement;
    if (r_max <= 0.0) r_max = 40.0 / k;

    // Trace both bracket ends on the sample mesh; splice once decayed or once they part ways.
    const detail::RadialOde ode{c0, p};
    auto step_lo = detail::make_stepper(rk_tol);
    auto step_hi = detail::make_stepper(rk_tol);
    const double r_start = std::min(1e-4 / k, 0.01 * dr);
    detail::RadialState x_lo = detail::series_start(lo, c0, p, r_start);
    detail::RadialState x_hi = detail::series_start(hi, c0, p, r_start);
    double r_lo = r_start, r_hi = r_start, h_lo = 0.1 * dr, h_hi = 0.1 * dr;

    std::vector<double> r_samples{0.0}, u_samples{lo}, du_samples{0.0};
    double splice_r = 0.0, splice_u = 0.0;
    for (std::size_t i = 1;; ++i) {
        const double ri = static_cast<double>(i) * dr;
        detail::advance(step_lo, ode, x_lo, r_lo, ri, h_lo);
        detail::advance(step_hi, ode, x_hi, r_hi, ri, h_hi);
        const bool decayed = x_lo[0] < opts.splice_fraction * lo;
        const bool parted = std::abs(x_hi[0] - x_lo[0]) > 1e-4 * std::abs(x_lo[0]);
        const bool broken = x_lo[0] <= 0.0 || x_lo[1] >= 0.0;
        if (broken && i < 8) throw ResolutionError("shooting: separatrix trajectory failed near the origin");
        if (decayed || parted || broken || ri >= r_max) {
            splice_r = r_samples.back();
            splice_u = u_samples.back();
            break;
        }
        r_samples.push_back(ri);
        u_samples.push_back(x_lo[0]);
        du_samples.push_back(x_lo[1]);
    }
    const double amplitude = splice_u * splice_r * std::exp(k * splice_r);

    auto tail = [&](double r) { return amplitude * std::exp(-k * r) / r; };
    while (tail(r_max) >= tol * lo) r_max *= 1.25;
    std::size_t intervals = static_cast<std::size_t>(std::ceil(r_max / dr));
    if (intervals % 2 == 1) ++intervals;
    r_max = static_cast<double>(intervals) * dr;
    for (std::size_t i = r_samples.size(); i <= intervals; ++i) {
        const double ri = static_cast<double>(i) * dr;
        r_samples.push_back(ri);
        u_samples.push_back(tail(ri));
        du_samples.push_back(-amplitude * std::exp(-k * ri) * (k * ri + 1.0) / (ri * ri));
    }
    r_samples.resize(intervals + 1);
    u_samples.resize(intervals + 1);
    du_samples.resize(intervals + 1);

    RadialProfile prof;
    prof.c0 = c0;
    prof.p = p;
    prof.tol = tol;
    prof.r_max = r_max;
    prof.r_samples = std::move(r_samples);
    prof.u_samples = std::move(u_samples);
    prof.du_samples = std::move(du_samples);
    prof.u0 = lo;
    prof.tail_amplitude = amplitude;
    prof.finalize();
    prof.m_inf = m_infinity(prof);

    // Least-squares slope of -log U over the outer half of the mesh.
    double sx = 0, sy = 0, sxx = 0, sxy = 0, count = 0;
    for (std::size_t i = 0; i < prof.r_samples.size(); ++i) {
        const double r = prof.r_samples[i];
        if (r < 0.5 * r_max) continue;
        const double y = -std::log(prof.u_samples[i]);
        sx += r, sy += y, sxx += r * r, sxy += r * y, count += 1;
    }
    prof.decay_rate = (count * sxy - sx * sy) / (count * sxx - sx * sx);
    return prof;
}

// ---------------------------------------------------------------------------
// Profile text dump
// ---------------------------------------------------------------------------

/// Two columns "r U(r)" preceded by '#' header lines; values round-trip exactly.
inline void write_profile(const RadialProfile& prof, std::ostream& os) {
    char buf[96];
    auto header = [&](const char* key, double v) {
        std::snprintf(buf, sizeof buf, "# %s = %.17g\n", key, v);
        os << buf;
    };
    os << "# radial ground state of -Delta U + c0 U = U^(p-1)\n";
    header("c0", prof.c0);
    header("p", prof.p);
    header("tol", prof.tol);
    header("m_inf", prof.m_inf);
    header("u0", prof.u0);
    header("decay_rate", prof.decay_rate);
    header("tail_amplitude", prof.tail_amplitude);
    header("r_max", prof.r_max);
    for (std::size_t i = 0; i < prof.r_samples.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g %.17g\n", prof.r_samples[i], prof.u_samples[i]);
        os << buf;
    }
}

inline RadialProfile read_profile(std::istream& is) {
    RadialProfile prof;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream hs(line.substr(1));
            std::string key, eq;
            double v = 0.0;
            if (!(hs >> key >> eq >> v) || eq != "=") continue;
            if (key == "c0") prof.c0 = v;
            else if (key == "p") prof.p = v;
            else if (key == "tol") prof.tol = v;
            else if (key == "m_inf") prof.m_inf = v;
            else if (key == "u0") prof.u0 = v;
            else if (key == "decay_rate") prof.decay_rate = v;
            else if (key == "tail_amplitude") prof.tail_amplitude = v;
            else if (key == "r_max") prof.r_max = v;
            continue;
        }
        std::istringstream ls(line);
        double r = 0, u = 0;
        if (!(ls >> r >> u)) throw FormatError("profile: malformed data line '" + line + "'");
        prof.r_samples.push_back(r);
        prof.u_samples.push_back(u);
    }
    if (prof.r_samples.size() < 4) throw FormatError("profile: too few samples");
    prof.r_max = prof.r_samples.back();
    prof.finalize();
    return prof;
}

// ---------------------------------------------------------------------------
// Cut-off bumps on the torus
// ---------------------------------------------------------------------------

/// C^1 cut-off: 1 on [0, r/2], cosine ramp to 0 on [r/2, r], 0 beyond.
inline double cutoff(double s, double r) {
    if (s <= 0.5 * r) return 1.0;
    if (s >= r) return 0.0;
    return 0.5 * (1.0 + std::cos(2.0 * std::numbers::pi * (s - 0.5 * r) / r));
}

/**
 * Position on the torus expressed as a grid node plus a sub-cell offset.
 *
 * Offsets are rounded to multiples of 2^-32 cells so that shifting the center
 * by whole cells reproduces exactly the same per-node distances.
 */
struct GridAnchor {
    std::array<long, 3> node{};
    std::array<double, 3> offset{};

    static GridAnchor of(const Point& xi, const TorusGrid& grid) {
        GridAnchor a;
        const long n = static_cast<long>(grid.n());
        for (int c = 0; c < 3; ++c) {
            const double cells = xi[c] / grid.spacing();
            const double base = std::round(cells);
            a.offset[c] = std::round((cells - base) * 4294967296.0) / 4294967296.0;
            a.node[c] = ((static_cast<long>(base) % n) + n) % n;
        }
        return a;
    }

    /// Displacement of node (i,j,k) from the anchor, wrapped into [-L/2, L/2)^3.
    Point displacement(const std::array<std::size_t, 3>& m, const TorusGrid& grid) const {
        const long n = static_cast<long>(grid.n());
        const double half = 0.5 * static_cast<double>(n);
        Point d{};
        for (int c = 0; c < 3; ++c) {
            long di = (static_cast<long>(m[c]) - node[c]) % n;
            if (di < 0) di += n;
            double v = static_cast<double>(di) - offset[c];
            if (v >= half) v -= static_cast<double>(n);
            if (v < -half) v += static_cast<double>(n);
            d[c] = v * grid.spacing();
        }
        return d;
    }
};

/**
 * W_{eps,xi}(x) = U(|x - xi| / eps) chi_r(|x - xi|) on the torus, r = L/2.
 *
 * Requires eps < r/4 so the cut-off region lies well inside the injectivity radius.
 */
inline Field bump_field(const Point& xi, const SystemParams& params, const RadialProfile& profile, const GridPtr& grid) {
    const double r = grid->injectivity_radius();
    if (!(params.eps < 0.25 * r)) throw std::invalid_argument("bump_field: eps must be below r/4");
    for (double c : xi)
        if (!std::isfinite(c)) throw std::invalid_argument("bump_field: center coordinates must be finite");
    const GridAnchor anchor = GridAnchor::of(xi, *grid);
    Field w(grid);
    for (std::size_t idx = 0; idx < grid->size(); ++idx) {
        const double s = norm3(anchor.displacement(grid->multi_index(idx), *grid));
        if (s >= r) continue;
        w[idx] = profile.value(s / params.eps) * cutoff(s, r);
    }
    return w;
}

} // namespace kgm
