#pragma once

// Complex values carried as real 2-vectors, acted on through their 2x2
// operator M(z) = [Re -Im; Im Re]. Products, quotients and conjugates are
// the operator actions; covariance blocks of frequency-domain estimators
// live in the same 2x2 algebra.

#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "specaus/error.hpp"

namespace specaus {

struct FreqValue {
  double re = 0.0;
  double im = 0.0;

  constexpr FreqValue() = default;
  constexpr FreqValue(double r, double i = 0.0) : re(r), im(i) {}

  /// Operator representation M(z); M(z) e1 = (re, im).
  Eigen::Matrix2d op() const {
    Eigen::Matrix2d m;
    m << re, -im, im, re;
    return m;
  }

  Eigen::Vector2d vec() const { return {re, im}; }
  static FreqValue from_vec(const Eigen::Vector2d& v) { return {v(0), v(1)}; }

  double norm_sq() const { return re * re + im * im; }
  double abs() const { return std::hypot(re, im); }
  FreqValue conj() const { return {re, -im}; }

  /// M(z)^{-1} e1.
  FreqValue inverse() const {
    const double d = norm_sq();
    return {re / d, -im / d};
  }

  bool finite() const { return std::isfinite(re) && std::isfinite(im); }

  /// The k-th power of a unit-circle point, from its angle.
  static FreqValue unit(double angle) { return {std::cos(angle), std::sin(angle)}; }

  friend FreqValue operator+(FreqValue a, FreqValue b) { return {a.re + b.re, a.im + b.im}; }
  friend FreqValue operator-(FreqValue a, FreqValue b) { return {a.re - b.re, a.im - b.im}; }
  friend FreqValue operator-(FreqValue a) { return {-a.re, -a.im}; }
  // M(a) b
  friend FreqValue operator*(FreqValue a, FreqValue b) {
    return {a.re * b.re - a.im * b.im, a.im * b.re + a.re * b.im};
  }
  friend FreqValue operator*(double s, FreqValue a) { return {s * a.re, s * a.im}; }
  friend FreqValue operator/(FreqValue a, FreqValue b) { return a * b.inverse(); }
  FreqValue& operator+=(FreqValue b) { return *this = *this + b; }
  FreqValue& operator*=(FreqValue b) { return *this = *this * b; }
  bool operator==(const FreqValue&) const = default;
};

/// Frequencies are points z = exp(-i theta) with theta in [0, pi].
inline FreqValue frequency(double theta) { return FreqValue::unit(-theta); }

/// Angle theta of z = exp(-i theta).
inline double angle_of(FreqValue z) { return -std::atan2(z.im, z.re); }

inline bool on_unit_circle(FreqValue z, double tol = 1e-12) { return std::abs(z.abs() - 1.0) < tol; }

/// z^k for integer k >= 0 on the unit circle, computed from the angle to
/// keep powers exactly unimodular up to rounding.
inline FreqValue power(FreqValue z, int k) {
  if (k == 0) return {1.0, 0.0};
  const double a = std::atan2(z.im, z.re);
  return FreqValue::unit(a * k);
}

/// n evenly spaced angles in the open interval (0, pi).
inline std::vector<double> default_grid(std::size_t n = 256) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = std::numbers::pi * static_cast<double>(i + 1) / static_cast<double>(n + 1);
  return out;
}

/// Angles 2*pi/period for periods evenly spaced in [min_period, max_period],
/// sorted by ascending angle.
inline std::vector<double> period_grid(double min_period, double max_period, std::size_t n) {
  if (!(min_period >= 2.0) || !(max_period >= min_period) || n == 0)
    throw ValidationError("period range must satisfy 2 <= min <= max with a positive count");
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
    const double period = max_period + (min_period - max_period) * t;
    out[i] = 2.0 * std::numbers::pi / period;
  }
  return out;
}

}  // namespace specaus
