/**
 * @file grid.hpp
 * @brief Periodic 3-torus discretization, scalar fields and the weighted norms
 *        used throughout the solver.
 *
 * The domain is the flat torus [0,L)^3 sampled on a uniform n^3 grid. The
 * Laplacian is applied spectrally through FFTW real-to-complex transforms and
 * integrals use the uniform weight h^3, which is spectrally accurate for smooth
 * periodic fields. All reductions go through pairwise_sum so results do not
 * depend on how many threads happen to share a grid.
 */
#pragma once

#include "kgm/errors.hpp"

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace kgm {

using Point = std::array<double, 3>;

enum class SystemKind { KGM, SM };

inline const char* to_string(SystemKind kind) { return kind == SystemKind::KGM ? "KGM" : "SM"; }

/**
 * Physical and asymptotic parameters of either coupled system.
 *
 * For SM the linear coefficient is fixed to one and `a` is ignored.
 */
struct SystemParams {
    SystemKind system = SystemKind::KGM;
    double eps = 0.1;
    double a = 1.0;
    double q = 1.0;
    double omega = 0.0;
    double p = 4.0;

    static SystemParams kgm(double eps, double a, double q, double omega, double p) {
        return {SystemKind::KGM, eps, a, q, omega, p};
    }
    static SystemParams sm(double eps, double q, double omega, double p) {
        return {SystemKind::SM, eps, 1.0, q, omega, p};
    }

    /// Coefficient of u in the limit equation: a - omega^2 (KGM) or 1 (SM).
    double c0() const { return system == SystemKind::KGM ? a - omega * omega : 1.0; }

    SystemParams with_eps(double e) const {
        SystemParams copy = *this;
        copy.eps = e;
        return copy;
    }

    void validate() const {
        auto fail = [](const std::string& what) { throw std::invalid_argument("SystemParams: " + what); };
        if (!(eps > 0.0) || !std::isfinite(eps)) fail("eps must be positive");
        if (!(q > 0.0) || !std::isfinite(q)) fail("q must be positive");
        if (!std::isfinite(omega) || !std::isfinite(p)) fail("omega and p must be finite");
        if (system == SystemKind::KGM) {
            if (!(a > 0.0)) fail("a must be positive");
            if (!(omega * omega < a)) fail("KGM requires omega^2 < a");
            if (!(p >= 4.0 && p < 6.0)) fail("KGM requires 4 <= p < 6");
        } else {
            if (!(omega > 0.0)) fail("SM requires omega > 0");
            if (!(p > 4.0 && p < 6.0)) fail("SM requires 4 < p < 6");
        }
    }
};

/**
 * Pairwise (cascade) summation of term(0) + ... + term(count-1).
 *
 * The split points depend only on count, so the rounding is a fixed function
 * of the inputs.
 */
template <class Term>
double pairwise_reduce(std::size_t begin, std::size_t end, const Term& term) {
    constexpr std::size_t block = 64;
    if (end - begin <= block) {
        double s = 0.0;
        for (std::size_t i = begin; i < end; ++i) s += term(i);
        return s;
    }
    const std::size_t mid = begin + (end - begin) / 2;
    return pairwise_reduce(begin, mid, term) + pairwise_reduce(mid, end, term);
}

inline double pairwise_sum(std::span<const double> v) {
    return pairwise_reduce(0, v.size(), [&](std::size_t i) { return v[i]; });
}

/**
 * Uniform periodic grid on [0,L)^3 with cached FFT plans and wavenumbers.
 *
 * Instances are immutable after construction and shared between fields via
 * GridPtr. FFTW plan execution on caller-owned buffers is thread safe; plan
 * creation is serialised internally.
 */
class TorusGrid {
  public:
    TorusGrid(std::size_t n, double length) : n_(n), length_(length) {
        if (n < 16 || n % 2 != 0) throw std::invalid_argument("TorusGrid: n must be even and >= 16");
        if (!(length > 0.0) || !std::isfinite(length)) throw std::invalid_argument("TorusGrid: length must be positive");
        const std::size_t nh = n / 2 + 1;
        spectral_size_ = n * n * nh;
        k2_.resize(spectral_size_);
        const double k0 = 2.0 * std::numbers::pi / length;
        auto freq = [n](std::size_t i) {
            return static_cast<double>(i <= n / 2 ? static_cast<long>(i) : static_cast<long>(i) - static_cast<long>(n));
        };
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                for (std::size_t k = 0; k < nh; ++k) {
                    const double kx = k0 * freq(i), ky = k0 * freq(j), kz = k0 * static_cast<double>(k);
                    k2_[(i * n + j) * nh + k] = kx * kx + ky * ky + kz * kz;
                }

        std::vector<double> real(size());
        std::vector<std::complex<double>> spec(spectral_size_);
        auto* creal = real.data();
        auto* cspec = reinterpret_cast<fftw_complex*>(spec.data());
        const int ni = static_cast<int>(n);
        std::scoped_lock lock(plan_mutex());
        // ESTIMATE keeps plan selection (and therefore rounding) identical run to run.
        forward_ = fftw_plan_dft_r2c_3d(ni, ni, ni, creal, cspec, FFTW_ESTIMATE | FFTW_UNALIGNED);
        backward_ = fftw_plan_dft_c2r_3d(ni, ni, ni, cspec, creal, FFTW_ESTIMATE | FFTW_UNALIGNED);
        if (!forward_ || !backward_) throw std::runtime_error("TorusGrid: FFTW planning failed");
    }

    TorusGrid(const TorusGrid&) = delete;
    TorusGrid& operator=(const TorusGrid&) = delete;

    ~TorusGrid() {
        std::scoped_lock lock(plan_mutex());
        fftw_destroy_plan(forward_);
        fftw_destroy_plan(backward_);
    }

    std::size_t n() const { return n_; }
    double length() const { return length_; }
    double spacing() const { return length_ / static_cast<double>(n_); }
    double cell_volume() const { const double h = spacing(); return h * h * h; }
    double volume() const { return length_ * length_ * length_; }
    /// The exponential map of the flat torus is injective on balls of radius L/2.
    double injectivity_radius() const { return 0.5 * length_; }
    std::size_t size() const { return n_ * n_ * n_; }
    std::size_t spectral_size() const { return spectral_size_; }

    std::size_t index(std::size_t i, std::size_t j, std::size_t k) const { return (i * n_ + j) * n_ + k; }
    std::array<std::size_t, 3> multi_index(std::size_t idx) const {
        return {idx / (n_ * n_), (idx / n_) % n_, idx % n_};
    }
    Point node(std::size_t idx) const {
        const auto m = multi_index(idx);
        const double h = spacing();
        return {static_cast<double>(m[0]) * h, static_cast<double>(m[1]) * h, static_cast<double>(m[2]) * h};
    }
    /// Grid node closest to x (periodically).
    std::size_t nearest_node(const Point& x) const {
        std::array<std::size_t, 3> m{};
        for (int d = 0; d < 3; ++d) {
            double s = std::round(x[d] / spacing());
            long v = static_cast<long>(s) % static_cast<long>(n_);
            if (v < 0) v += static_cast<long>(n_);
            m[d] = static_cast<std::size_t>(v);
        }
        return index(m[0], m[1], m[2]);
    }

    /// |k|^2 for every stored r2c coefficient.
    std::span<const double> wavenumber_sq() const { return k2_; }

    /// Unnormalised forward transform; `in` is left untouched.
    void forward(std::span<const double> in, std::span<std::complex<double>> out) const {
        fftw_execute_dft_r2c(forward_, const_cast<double*>(in.data()), reinterpret_cast<fftw_complex*>(out.data()));
    }
    /// Unnormalised inverse transform; `in` is overwritten.
    void backward(std::span<std::complex<double>> in, std::span<double> out) const {
        fftw_execute_dft_c2r(backward_, reinterpret_cast<fftw_complex*>(in.data()), out.data());
    }

    /// out = F^{-1}[ mult(|k|^2) F[in] ]. `in` and `out` may alias.
    template <class Multiplier>
    void apply_multiplier(std::span<const double> in, std::span<double> out, const Multiplier& mult) const {
        std::vector<std::complex<double>> spec(spectral_size_);
        forward(in, spec);
        const double norm = 1.0 / static_cast<double>(size());
        for (std::size_t s = 0; s < spectral_size_; ++s) spec[s] *= mult(k2_[s]) * norm;
        backward(spec, out);
    }

  private:
    static std::mutex& plan_mutex() {
        static std::mutex m;
        return m;
    }

    std::size_t n_;
    double length_;
    std::size_t spectral_size_ = 0;
    std::vector<double> k2_;
    fftw_plan forward_ = nullptr;
    fftw_plan backward_ = nullptr;
};

using GridPtr = std::shared_ptr<const TorusGrid>;

inline GridPtr make_grid(std::size_t n, double length) { return std::make_shared<const TorusGrid>(n, length); }

/// Real scalar field sampled on a TorusGrid, stored row-major over (i,j,k).
class Field {
  public:
    explicit Field(GridPtr grid, double fill = 0.0) : grid_(std::move(grid)), values_(grid_->size(), fill) {}
    Field(GridPtr grid, std::vector<double> values) : grid_(std::move(grid)), values_(std::move(values)) {
        if (values_.size() != grid_->size()) throw std::invalid_argument("Field: value count does not match grid");
    }

    template <class F>
    static Field from_function(GridPtr grid, const F& f) {
        Field u(grid);
        for (std::size_t idx = 0; idx < grid->size(); ++idx) u.values_[idx] = f(grid->node(idx));
        return u;
    }

    const TorusGrid& grid() const { return *grid_; }
    const GridPtr& grid_ptr() const { return grid_; }
    std::size_t size() const { return values_.size(); }
    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }
    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }

    bool same_grid(const Field& other) const {
        return grid_ == other.grid_ || (grid_->n() == other.grid_->n() && grid_->length() == other.grid_->length());
    }
    void require_same_grid(const Field& other) const {
        if (!same_grid(other)) throw std::invalid_argument("Field: operands live on different grids");
    }

    bool all_finite() const {
        return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
    }
    double max() const { return *std::max_element(values_.begin(), values_.end()); }
    double min() const { return *std::min_element(values_.begin(), values_.end()); }

    Field& operator+=(const Field& o) {
        require_same_grid(o);
        for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
        return *this;
    }
    Field& operator-=(const Field& o) {
        require_same_grid(o);
        for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
        return *this;
    }
    Field& operator*=(double s) {
        for (double& v : values_) v *= s;
        return *this;
    }
    /// this += s * o
    Field& axpy(double s, const Field& o) {
        require_same_grid(o);
        for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += s * o.values_[i];
        return *this;
    }

    friend Field operator+(Field a, const Field& b) { return a += b; }
    friend Field operator-(Field a, const Field& b) { return a -= b; }
    friend Field operator*(Field a, double s) { return a *= s; }
    friend Field operator*(double s, Field a) { return a *= s; }

  private:
    GridPtr grid_;
    std::vector<double> values_;
};

// ---------------------------------------------------------------------------
// Integrals and norms
// ---------------------------------------------------------------------------

inline double integrate(const Field& u) { return u.grid().cell_volume() * pairwise_sum(u.values()); }

/// Grid quadrature of u*v.
inline double inner(const Field& u, const Field& v) {
    u.require_same_grid(v);
    const auto a = u.values();
    const auto b = v.values();
    return u.grid().cell_volume() * pairwise_reduce(0, a.size(), [&](std::size_t i) { return a[i] * b[i]; });
}

/// Discrete l2 norm of the samples (no quadrature weight).
inline double l2_norm(const Field& u) {
    const auto a = u.values();
    return std::sqrt(pairwise_reduce(0, a.size(), [&](std::size_t i) { return a[i] * a[i]; }));
}

inline double sup_norm(const Field& u) {
    double m = 0.0;
    for (double v : u.values()) m = std::max(m, std::abs(v));
    return m;
}

inline Field laplacian(const Field& u) {
    Field out(u.grid_ptr());
    u.grid().apply_multiplier(u.values(), out.values(), [](double k2) { return -k2; });
    return out;
}

/// Solves (alpha(-Laplacian) + beta) x = f spectrally; requires beta > 0.
inline Field spectral_solve(const Field& f, double alpha, double beta) {
    Field out(f.grid_ptr());
    f.grid().apply_multiplier(f.values(), out.values(), [=](double k2) { return 1.0 / (alpha * k2 + beta); });
    return out;
}

/// Integral of |grad u|^2, evaluated in Fourier space.
inline double gradient_sq_integral(const Field& u) {
    const TorusGrid& g = u.grid();
    std::vector<std::complex<double>> spec(g.spectral_size());
    g.forward(u.values(), spec);
    const std::size_t n = g.n(), nh = n / 2 + 1;
    const auto k2 = g.wavenumber_sq();
    const double s = pairwise_reduce(0, spec.size(), [&](std::size_t idx) {
        const std::size_t kz = idx % nh;
        const double weight = (kz == 0 || kz == n / 2) ? 1.0 : 2.0;
        return weight * k2[idx] * std::norm(spec[idx]);
    });
    return g.cell_volume() * s / static_cast<double>(g.size());
}

/// ||u||_eps^2 = eps^-3 (eps^2 int |grad u|^2 + c0 int u^2).
inline double h_eps_norm_sq(const Field& u, const SystemParams& params) {
    const double e = params.eps;
    return (e * e * gradient_sq_integral(u) + params.c0() * inner(u, u)) / (e * e * e);
}

/// (eps^-3 int w^p)^(1/p) with w = |u| or w = max(u,0).
inline double lp_norm_eps(const Field& u, double p, double eps, bool positive_part) {
    if (!(p >= 1.0)) throw std::invalid_argument("lp_norm_eps: p must be >= 1");
    const auto a = u.values();
    const double s = pairwise_reduce(0, a.size(), [&](std::size_t i) {
        const double w = positive_part ? std::max(a[i], 0.0) : std::abs(a[i]);
        return w > 0.0 ? std::pow(w, p) : 0.0;
    });
    return std::pow(u.grid().cell_volume() * s / (eps * eps * eps), 1.0 / p);
}

/// eps^-3 int (u+)^p, i.e. |u+|_{eps,p}^p without the final root.
inline double positive_power_integral(const Field& u, double p, double eps) {
    const auto a = u.values();
    const double s = pairwise_reduce(0, a.size(), [&](std::size_t i) { return a[i] > 0.0 ? std::pow(a[i], p) : 0.0; });
    return u.grid().cell_volume() * s / (eps * eps * eps);
}

// ---------------------------------------------------------------------------
// Torus geometry
// ---------------------------------------------------------------------------

/// Representative of x - xi in [-L/2, L/2)^3: the inverse exponential map at xi.
inline Point wrap_displacement(const Point& x, const Point& xi, const TorusGrid& grid) {
    const double L = grid.length();
    Point d{};
    for (int c = 0; c < 3; ++c) {
        double v = x[c] - xi[c];
        v -= L * std::floor(v / L + 0.5);
        if (v >= 0.5 * L) v -= L;
        if (v < -0.5 * L) v += L;
        d[c] = v;
    }
    return d;
}

inline double norm3(const Point& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }

inline double torus_distance(const Point& x, const Point& y, const TorusGrid& grid) {
    return norm3(wrap_displacement(x, y, grid));
}

/// Reduces each coordinate into [0,L).
inline Point wrap_point(Point x, const TorusGrid& grid) {
    const double L = grid.length();
    for (double& c : x) {
        c -= L * std::floor(c / L);
        if (c >= L) c -= L;
    }
    return x;
}

/// Cyclic shift: result(x + shift*h) = u(x).
inline Field translate(const Field& u, const std::array<long, 3>& shift) {
    const TorusGrid& g = u.grid();
    const long n = static_cast<long>(g.n());
    auto wrap = [n](long v) { return static_cast<std::size_t>(((v % n) + n) % n); };
    Field out(u.grid_ptr());
    for (std::size_t idx = 0; idx < g.size(); ++idx) {
        const auto m = g.multi_index(idx);
        out[g.index(wrap(static_cast<long>(m[0]) + shift[0]), wrap(static_cast<long>(m[1]) + shift[1]),
                    wrap(static_cast<long>(m[2]) + shift[2]))] = u[idx];
    }
    return out;
}

} // namespace kgm
