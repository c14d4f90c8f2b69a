/**
 * @file errors.hpp
 * @brief Exception types raised by the solver library.
 *
 * Every failure mode that a caller may want to handle distinctly has its own
 * type; all derive from kgm::Error so a single catch covers the library.
 */
#pragma once

#include <cstddef>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace kgm {

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Shooting could not exhibit both undershoot and overshoot behaviours.
class BracketNotFound : public Error {
  public:
    using Error::Error;
};

/// ODE step-size control collapsed.
class ResolutionError : public Error {
  public:
    using Error::Error;
};

class ProfileRangeError : public Error {
  public:
    using Error::Error;
};

/// Iterative linear solve stalled before reaching its residual target.
class NoConvergence : public Error {
    static std::string format_residual(double r) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3e", r);
        return buf;
    }

  public:
    NoConvergence(std::size_t iterations, double residual)
        : Error("linear solve did not converge after " + std::to_string(iterations) +
                " iterations (relative residual " + format_residual(residual) + ")"),
          iterations_(iterations), residual_(residual) {}

    std::size_t iterations() const noexcept { return iterations_; }
    double residual() const noexcept { return residual_; }

  private:
    std::size_t iterations_;
    double residual_;
};

/// u+ vanishes identically, so no fiber projection or barycenter exists.
class ZeroPositivePart : public Error {
  public:
    ZeroPositivePart() : Error("positive part of the field vanishes identically") {}
};

/// Fiber map derivative never changes sign on the expanded bracket.
class NoRoot : public Error {
  public:
    using Error::Error;
};

/// Circular mean undefined: the resultant vector has (near) zero length.
class DegenerateMean : public Error {
  public:
    using Error::Error;
};

class FormatError : public Error {
  public:
    using Error::Error;
};

class IoError : public Error {
  public:
    using Error::Error;
};

} // namespace kgm
