#pragma once

// Wald tests, confidence ellipsoids and norm intervals for
// frequency-domain estimators.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "specaus/asymptotics.hpp"
#include "specaus/chi2.hpp"
#include "specaus/error.hpp"
#include "specaus/freqdom.hpp"
#include "specaus/log.hpp"

namespace specaus {

/// alpha is the confidence level; reject when W >= chi2_quantile(alpha, dof).
struct WaldReport {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 1.0;
  double alpha = 0.95;
  bool reject = false;
  std::size_t T = 0;
  double condition = 1.0;
  bool floored = false;
};

namespace detail {

struct SymInverse {
  Eigen::MatrixXd inverse;
  double condition = 1.0;
  bool floored = false;
};

/// Inverse of a symmetric positive definite covariance via its
/// eigendecomposition, with eigenvalues floored at 1e-12 * trace.
inline SymInverse covariance_inverse(const Eigen::MatrixXd& acov) {
  if (acov.rows() != acov.cols() || acov.rows() == 0) throw ValidationError("covariance must be square and nonempty");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (acov + acov.transpose()));
  const Eigen::VectorXd& ev = es.eigenvalues();
  const double lo = ev.minCoeff();
  const double hi = ev.maxCoeff();
  if (!(lo > 0.0) || hi / lo >= kMaxCondition)
    throw NumericalError("asymptotic covariance singular or ill-conditioned (smallest eigenvalue " + std::to_string(lo) +
                         ")");
  SymInverse out;
  out.condition = hi / lo;
  const double floor = 1e-12 * ev.sum();
  Eigen::VectorXd inv(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) < floor) out.floored = true;
    inv(i) = 1.0 / std::max(ev(i), floor);
  }
  if (out.floored) log::warn("covariance eigenvalue floored; the asymptotic distribution may be degenerate");
  out.inverse = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
  return out;
}

}  // namespace detail

inline WaldReport wald_test(const Eigen::VectorXd& theta, const Eigen::MatrixXd& acov, std::size_t T, double alpha) {
  if (theta.size() != acov.rows()) throw ValidationError("estimate and covariance dimensions differ");
  if (T == 0) throw ValidationError("sample size must be positive");
  const auto inv = detail::covariance_inverse(acov);
  WaldReport r;
  r.dof = static_cast<int>(theta.size());
  r.statistic = static_cast<double>(T) * theta.dot(inv.inverse * theta);
  r.p_value = chi2_sf(r.statistic, r.dof);
  r.alpha = alpha;
  r.reject = r.statistic >= chi2_quantile(alpha, r.dof);
  r.T = T;
  r.condition = inv.condition;
  r.floored = inv.floored;
  return r;
}

/// {x : T (x - center)^T shape^{-1} (x - center) <= chi2_quantile(alpha, m)}.
struct ConfidenceRegion {
  Eigen::VectorXd center;
  Eigen::MatrixXd shape;
  double radius_sq = 0.0;
  double alpha = 0.95;

  bool contains(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd d = x - center;
    return d.dot(shape.ldlt().solve(d)) <= radius_sq;
  }
};

inline ConfidenceRegion confidence_region(const Eigen::VectorXd& theta, const Eigen::MatrixXd& acov, std::size_t T,
                                          double alpha) {
  if (theta.size() != acov.rows() || acov.rows() != acov.cols()) throw ValidationError("dimension mismatch");
  if (T == 0) throw ValidationError("sample size must be positive");
  ConfidenceRegion r;
  r.center = theta;
  r.shape = 0.5 * (acov + acov.transpose());
  r.radius_sq = chi2_quantile(alpha, static_cast<int>(theta.size())) / static_cast<double>(T);
  r.alpha = alpha;
  return r;
}

struct NormInterval {
  double lo = 0.0;
  double hi = 0.0;

  NormInterval squared() const { return {lo * lo, hi * hi}; }
  bool contains(double x) const { return lo <= x && x <= hi; }
};

namespace detail {

template <class F>
double bisect_decreasing(F fn, double lo, double hi, double target) {
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (fn(mid) > target)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

/// Smallest and largest Euclidean norm over the ellipsoid, from the
/// trust-region secular equations in the eigenbasis of the shape matrix.
inline NormInterval norm_interval(const ConfidenceRegion& region) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(region.shape);
  const Eigen::VectorXd s = es.eigenvalues().cwiseMax(0.0);
  const Eigen::VectorXd c = es.eigenvectors().transpose() * region.center;
  const double r2 = region.radius_sq;
  const Eigen::Index n = s.size();
  const double smax = s.maxCoeff();
  const double scale = std::max(smax, std::numeric_limits<double>::min());
  NormInterval out;

  double weight = 0.0;  // sum s_i c_i^2
  for (Eigen::Index i = 0; i < n; ++i) weight += s(i) * c(i) * c(i);

  // Maximum: y_i = s_i c_i / (lambda - s_i), lambda > s_max.
  {
    const double tie = 1e-12 * scale;
    double top_mass = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      if (s(i) >= smax - tie) top_mass += c(i) * c(i);
    auto secular = [&](double lam) {
      double acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double den = lam - s(i);
        acc += s(i) * c(i) * c(i) / (den * den);
      }
      return acc;
    };
    auto norm_at = [&](double lam) {
      double acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double xi = c(i) * lam / (lam - s(i));
        acc += xi * xi;
      }
      return acc;
    };
    if (smax <= 0.0) {
      out.hi = region.center.norm();
    } else if (top_mass == 0.0) {
      // Hard case: the center has no component along the top eigenspace.
      double rest = 0.0;
      double base = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (s(i) >= smax - tie) continue;
        const double den = smax - s(i);
        rest += s(i) * c(i) * c(i) / (den * den);
      }
      if (rest <= r2) {
        for (Eigen::Index i = 0; i < n; ++i) {
          if (s(i) >= smax - tie) continue;
          const double xi = c(i) * smax / (smax - s(i));
          base += xi * xi;
        }
        out.hi = std::sqrt(base + smax * (r2 - rest));
      } else {
        const double hi = smax + std::sqrt(weight / r2) + scale;
        const double lam = detail::bisect_decreasing(secular, smax + tie, hi, r2);
        out.hi = std::sqrt(norm_at(lam));
      }
    } else {
      const double hi = smax + std::sqrt(weight / r2) + scale;
      const double lam = detail::bisect_decreasing(secular, smax, hi, r2);
      out.hi = std::sqrt(norm_at(lam));
    }
  }

  // Minimum: zero when the origin is inside, else y_i = -s_i c_i / (s_i + lambda).
  {
    double mahal = 0.0;
    bool outside_null = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (s(i) > 0.0)
        mahal += c(i) * c(i) / s(i);
      else if (c(i) != 0.0)
        outside_null = true;
    }
    if (!outside_null && mahal <= r2) {
      out.lo = 0.0;
    } else {
      auto secular = [&](double lam) {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
          const double den = s(i) + lam;
          acc += s(i) * c(i) * c(i) / (den * den);
        }
        return acc;
      };
      const double hi = std::sqrt(weight / r2) + scale;
      const double lam = detail::bisect_decreasing(secular, 0.0, hi, r2);
      double acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double xi = c(i) * lam / (s(i) + lam);
        acc += xi * xi;
      }
      out.lo = std::sqrt(acc);
    }
  }
  out.lo = std::min(out.lo, region.center.norm());
  out.hi = std::max(out.hi, region.center.norm());
  return out;
}

/// Estimate, covariance and Wald report of one query at one frequency.
struct EffectTest {
  Eigen::VectorXd theta;
  BlockCov acov;
  WaldReport wald;
};

namespace detail {

inline EffectTest finish(Eigen::VectorXd theta, BlockCov acov, std::size_t T, double alpha) {
  EffectTest t;
  t.wald = wald_test(theta, acov.matrix, T, alpha);
  t.theta = std::move(theta);
  t.acov = std::move(acov);
  return t;
}

inline BlockCov single_block(std::string label, const Eigen::Matrix2d& m, std::size_t T) {
  BlockCov b;
  b.labels.push_back(std::move(label));
  b.matrix = 0.5 * (m + m.transpose());
  b.T = T;
  return b;
}

}  // namespace detail

/// H0: h^{(pi)}(z) = 0.
inline EffectTest test_path_effect(const ModelFit& fit, const Path& p, FreqValue z, double alpha) {
  FreqAcov ac(fit, z);
  const FreqValue h = path_function(fit.model, p, z);
  return detail::finish(h.vec(), detail::single_block(to_string(fit.graph, p), ac.paths(p, p), fit.T), fit.T, alpha);
}

/// H0: h^{(pi)}(z) = 0 for every pi in the set.
inline EffectTest test_any_path(const ModelFit& fit, const std::vector<Path>& ps, FreqValue z, double alpha) {
  if (ps.empty()) throw ValidationError("empty path set: no testable effect");
  FreqAcov ac(fit, z);
  Eigen::VectorXd theta(2 * static_cast<Eigen::Index>(ps.size()));
  for (std::size_t i = 0; i < ps.size(); ++i)
    theta.segment<2>(2 * static_cast<Eigen::Index>(i)) = path_function(fit.model, ps[i], z).vec();
  return detail::finish(std::move(theta), ac.path_set(ps), fit.T, alpha);
}

/// H0: h^{Pi}(z) = 0.
inline EffectTest test_total_effect(const ModelFit& fit, const std::vector<Path>& ps, FreqValue z, double alpha) {
  if (ps.empty()) throw ValidationError("empty path set: no testable effect");
  FreqAcov ac(fit, z);
  const FreqValue h = total_effect(fit.model, ps, z);
  return detail::finish(h.vec(), detail::single_block("total", ac.total(ps, ps), fit.T), fit.T, alpha);
}

/// H0: g^{Pi_u}(z) = 0 for every ancestor u of v.
inline EffectTest test_spectral_contribution(const ModelFit& fit, Vertex v, Vertex w, const std::vector<Path>& ps,
                                             FreqValue z, double alpha) {
  if (ps.empty()) throw ValidationError("empty path set: no testable effect");
  FreqAcov ac(fit, z);
  const Contribution c = spectral_contribution(fit.model, v, w, ps, z);
  Eigen::VectorXd theta(2 * static_cast<Eigen::Index>(c.per_ancestor.size()));
  for (std::size_t i = 0; i < c.per_ancestor.size(); ++i)
    theta.segment<2>(2 * static_cast<Eigen::Index>(i)) = c.per_ancestor[i].g.vec();
  return detail::finish(std::move(theta), ac.contribution(v, w, ps), fit.T, alpha);
}

/// H0: phi_{u,w}(z) = 0; linear in the coefficients, so free of the
/// internal-function poles.
inline EffectTest test_robust(const ModelFit& fit, Vertex u, Vertex w, FreqValue z, double alpha) {
  if (!fit.graph.has_edge(u, w)) throw ValidationError("robust test needs a process-graph edge");
  FreqAcov ac(fit, z);
  const BlockCov all = ac.lag_polys(w);
  const auto& pa = fit.graph.parents(w);
  const auto pos = static_cast<std::size_t>(std::find(pa.begin(), pa.end(), u) - pa.begin());
  const FreqValue phi = lag_poly(fit.at(w).coeffs_of(u), z);
  return detail::finish(phi.vec(), detail::single_block(all.labels[pos], all.block(pos, pos), fit.T), fit.T, alpha);
}

/// Interval for the spectral contribution sum_u omega_u |g^{Pi_u}|^2: the
/// squared norm interval of D^{1/2} theta with D = diag(omega_u), the noise
/// variances taken as known.
inline NormInterval contribution_interval(const EffectTest& t, const Eigen::VectorXd& omega, double alpha) {
  const Eigen::Index n = omega.size();
  Eigen::VectorXd d(2 * n);
  for (Eigen::Index i = 0; i < n; ++i) d.segment<2>(2 * i).setConstant(std::sqrt(omega(i)));
  const Eigen::VectorXd theta = d.asDiagonal() * t.theta;
  const Eigen::MatrixXd shape = d.asDiagonal() * t.acov.matrix * d.asDiagonal();
  return norm_interval(confidence_region(theta, shape, t.wald.T, alpha)).squared();
}

}  // namespace specaus
