#pragma once

// Lagged regression designs and per-vertex least squares fits.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "specaus/error.hpp"
#include "specaus/graph.hpp"
#include "specaus/log.hpp"
#include "specaus/svar.hpp"

namespace specaus {

/// Target X_v(t) and regressors X_u(t-k), one column per (u, k) in L_v in
/// lag-set order (driver, then lag).
struct LaggedDesign {
  Vertex target = 0;
  LagSet lags;
  Eigen::VectorXd y;
  Eigen::MatrixXd x;

  std::size_t rows() const { return static_cast<std::size_t>(y.size()); }
};

inline LaggedDesign build_design(const SeriesSample& sample, Vertex v, const LagSet& lags, int q) {
  if (q < 0) throw ValidationError("order bound must be non-negative");
  const auto n = static_cast<Eigen::Index>(sample.length());
  if (n < q + 1) throw ValidationError("series too short: need at least q + 1 columns");
  if (v >= sample.dim()) throw ValidationError("target vertex out of range");
  for (const Lag& l : lags) {
    if (l.lag > q) throw ValidationError("lag exceeds the order bound");
    if (l.driver >= sample.dim()) throw ValidationError("driver vertex out of range");
  }
  const Eigen::Index rows = n - q;
  LaggedDesign d;
  d.target = v;
  d.lags = lags;
  d.y = sample.data.row(static_cast<Eigen::Index>(v)).segment(q, rows).transpose();
  d.x.resize(rows, static_cast<Eigen::Index>(lags.size()));
  for (std::size_t j = 0; j < lags.size(); ++j) {
    const Lag& l = lags[j];
    d.x.col(static_cast<Eigen::Index>(j)) =
        sample.data.row(static_cast<Eigen::Index>(l.driver)).segment(q - l.lag, rows).transpose();
  }
  return d;
}

/// Least squares fit of one vertex. precision is the asymptotic covariance
/// of sqrt(T) (phi_hat - phi): omega_hat * sigma_hat^{-1}.
struct VertexFit {
  Vertex target = 0;
  LagSet lags;
  Eigen::VectorXd phi_hat;
  double omega_hat = 0.0;
  Eigen::MatrixXd sigma_hat;
  Eigen::MatrixXd precision;
  std::size_t T = 0;
  double condition = 1.0;

  /// Estimated lag coefficients of one driver as (lag, value) pairs.
  std::vector<std::pair<int, double>> coeffs_of(Vertex driver) const {
    std::vector<std::pair<int, double>> out;
    for (std::size_t j = 0; j < lags.size(); ++j)
      if (lags[j].driver == driver) out.emplace_back(lags[j].lag, phi_hat(static_cast<Eigen::Index>(j)));
    return out;
  }
};

inline constexpr double kMaxCondition = 1e12;

namespace detail {

/// Validates the second-moment matrix and returns its condition number.
inline double check_moments(const Eigen::MatrixXd& sigma, const std::string& what) {
  if (sigma.rows() == 0) return 1.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo >= kMaxCondition) {
    throw NumericalError(what + ": design singular or ill-conditioned (smallest singular value " +
                         std::to_string(std::sqrt(std::max(lo, 0.0))) + ")");
  }
  return hi / lo;
}

inline Eigen::MatrixXd symmetric_inverse(const Eigen::MatrixXd& s) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(s);
  Eigen::MatrixXd inv = ldlt.solve(Eigen::MatrixXd::Identity(s.rows(), s.cols()));
  return 0.5 * (inv + inv.transpose());
}

}  // namespace detail

inline VertexFit ols_fit(const LaggedDesign& design) {
  const auto rows = static_cast<double>(design.rows());
  if (design.rows() == 0) throw ValidationError("empty design");
  VertexFit fit;
  fit.target = design.target;
  fit.lags = design.lags;
  fit.T = design.rows();
  fit.sigma_hat = design.x.transpose() * design.x / rows;
  fit.condition = detail::check_moments(fit.sigma_hat, "vertex " + std::to_string(design.target));
  if (design.x.cols() > 0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design.x);
    fit.phi_hat = qr.solve(design.y);
  } else {
    fit.phi_hat.resize(0);
  }
  const Eigen::VectorXd resid = design.y - design.x * fit.phi_hat;
  fit.omega_hat = resid.squaredNorm() / rows;
  fit.precision = design.x.cols() > 0 ? Eigen::MatrixXd(fit.omega_hat * detail::symmetric_inverse(fit.sigma_hat))
                                      : Eigen::MatrixXd(0, 0);
  return fit;
}

/// Per-vertex fits over a lag map plus the assembled coefficient model.
struct ModelFit {
  ProcessGraph graph;
  ContempGraph contemp;
  LagMap lags;
  std::vector<VertexFit> fits;  // indexed by vertex
  SvarModel model;
  std::size_t T = 0;
  std::vector<std::string> warnings;

  const VertexFit& at(Vertex v) const { return fits.at(v); }
};

namespace detail {

inline ModelFit assemble(const ProcessGraph& g, const ContempGraph& g0, const LagMap& lags, std::vector<VertexFit> fits) {
  ModelFit out;
  out.graph = g;
  out.contemp = g0;
  out.lags = lags;
  out.T = fits.empty() ? 0 : fits.front().T;
  std::vector<Coefficient> coeffs;
  Eigen::VectorXd omega(static_cast<Eigen::Index>(g.size()));
  for (const auto& f : fits) {
    for (std::size_t j = 0; j < f.lags.size(); ++j)
      coeffs.push_back({f.lags[j].driver, f.target, f.lags[j].lag, f.phi_hat(static_cast<Eigen::Index>(j))});
    if (!(f.omega_hat > 0.0)) throw NumericalError("zero residual variance for " + g.name(f.target));
    omega(static_cast<Eigen::Index>(f.target)) = f.omega_hat;
  }
  out.model = SvarModel::from_coefficients(g, g0, coeffs, omega);
  out.fits = std::move(fits);
  const auto st = check_stability(out.model);
  if (!st.stable) {
    out.warnings.push_back("estimated model is not stable (spectral radius " + std::to_string(st.spectral_radius) + ")");
    log::warn(out.warnings.back());
  }
  return out;
}

inline void require_valid(const ProcessGraph& g, const ContempGraph& g0, const LagMap& lags) {
  const auto report = validate_lag_map(g, g0, lags);
  if (!report.valid()) {
    const auto& e = report.violations.front();
    throw ValidationError("lag map violates the lag condition at target " + g.name(e.target) + ": " + e.reason);
  }
}

}  // namespace detail

inline ModelFit fit_all(const SeriesSample& sample, const LagMap& lags, const ProcessGraph& g, const ContempGraph& g0) {
  detail::require_valid(g, g0, lags);
  if (sample.dim() != g.size()) throw ValidationError("sample has a different number of processes than the graph");
  std::vector<VertexFit> fits;
  for (Vertex v = 0; v < g.size(); ++v) {
    try {
      fits.push_back(ols_fit(build_design(sample, v, lags.at(v), lags.order)));
    } catch (const NumericalError& e) {
      throw NumericalError(g.name(v) + ": " + e.what());
    }
  }
  return detail::assemble(g, g0, lags, std::move(fits));
}

/// Fit computed from exact population moments of a stable model. Recovers
/// the true coefficients whenever L contains the true lagged parents; the
/// precision matrices are the population P^{L_v}. T is set to sample_size.
inline ModelFit population_fit(const SvarModel& model, const LagMap& lags, std::size_t sample_size = 1) {
  const auto& g = model.graph();
  detail::require_valid(g, model.contemp(), lags);
  const Acs acs = acs_from_params(model, lags.order);
  std::vector<VertexFit> fits;
  for (Vertex v = 0; v < g.size(); ++v) {
    const LagSet& set = lags.at(v);
    const auto n = static_cast<Eigen::Index>(set.size());
    VertexFit f;
    f.target = v;
    f.lags = set;
    f.T = sample_size;
    f.sigma_hat.resize(n, n);
    Eigen::VectorXd cross(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Lag& a = set[static_cast<std::size_t>(i)];
      cross(i) = acs.cov(a.driver, a.lag, v, 0);
      for (Eigen::Index j = 0; j < n; ++j) {
        const Lag& b = set[static_cast<std::size_t>(j)];
        f.sigma_hat(i, j) = acs.cov(a.driver, a.lag, b.driver, b.lag);
      }
    }
    f.condition = detail::check_moments(f.sigma_hat, g.name(v));
    const double yy = acs.at(0)(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(v));
    if (n > 0) {
      const Eigen::MatrixXd inv = detail::symmetric_inverse(f.sigma_hat);
      f.phi_hat = inv * cross;
      f.omega_hat = yy - cross.dot(f.phi_hat);
      f.precision = f.omega_hat * inv;
    } else {
      f.phi_hat.resize(0);
      f.omega_hat = yy;
      f.precision.resize(0, 0);
    }
    fits.push_back(std::move(f));
  }
  return detail::assemble(g, model.contemp(), lags, std::move(fits));
}

}  // namespace specaus
