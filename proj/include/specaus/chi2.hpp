#pragma once

// Chi-square tail probabilities and quantiles through the regularized
// incomplete gamma function.

#include <cmath>
#include <limits>

#include "specaus/error.hpp"

namespace specaus {

namespace detail {

// Series for P(a, x), valid for x < a + 1.
inline double gamma_p_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  for (int n = 1; n < 100000; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::abs(term) < std::abs(sum) * 1e-17) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Modified Lentz continued fraction for Q(a, x), valid for x >= a + 1.
inline double gamma_q_fraction(double a, double x) {
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 100000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace detail

/// Regularized upper incomplete gamma Q(a, x).
inline double gamma_q(double a, double x) {
  if (!(a > 0.0) || x < 0.0) throw ValidationError("gamma_q needs a > 0 and x >= 0");
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  if (x < a + 1.0) return 1.0 - detail::gamma_p_series(a, x);
  return detail::gamma_q_fraction(a, x);
}

/// P(chi2(m) >= x).
inline double chi2_sf(double x, int m) {
  if (m < 1) throw ValidationError("degrees of freedom must be positive");
  if (x <= 0.0) return 1.0;
  return gamma_q(0.5 * m, 0.5 * x);
}

inline double chi2_cdf(double x, int m) { return 1.0 - chi2_sf(x, m); }

/// x with P(chi2(m) <= x) = alpha, by bracketed bisection on the survival function.
inline double chi2_quantile(double alpha, int m) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("chi-square level must lie in (0, 1)");
  if (m < 1) throw ValidationError("degrees of freedom must be positive");
  const double target = 1.0 - alpha;
  double lo = 0.0;
  double hi = std::max(1.0, static_cast<double>(m));
  while (chi2_sf(hi, m) > target) {
    lo = hi;
    hi *= 2.0;
  }
  for (int it = 0; it < 300; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (chi2_sf(mid, m) > target)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace specaus
