#pragma once

// Structural VAR models: representation, stability, simulation, exact
// autocovariances and the inverse map from autocovariances back to
// structural parameters.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "specaus/error.hpp"
#include "specaus/freq.hpp"
#include "specaus/graph.hpp"

namespace specaus {

/// A single structural coefficient phi_{driver,target}(lag).
struct Coefficient {
  Vertex driver;
  Vertex target;
  int lag;
  double value;
};

/// Stable SVAR process X_v(t) = eta_v(t) + sum phi_{u,v}(k) X_u(t-k) with
/// independent Gaussian noise of variance omega_v.
///
/// Coefficients are stored as lag matrices: lag_matrix(k)(v, u) holds
/// phi_{u,v}(k), so that X(t) = sum_k Phi(k) X(t-k) + eta(t).
class SvarModel {
 public:
  SvarModel() = default;

  SvarModel(ProcessGraph graph, ContempGraph contemp, std::vector<Eigen::MatrixXd> lag_matrices,
            Eigen::VectorXd noise_vars)
      : graph_(std::move(graph)),
        contemp_(std::move(contemp)),
        phi_(std::move(lag_matrices)),
        omega_(std::move(noise_vars)) {
    const auto m = static_cast<Eigen::Index>(graph_.size());
    if (contemp_.size() != graph_.size()) throw ValidationError("contemporaneous graph has a different vertex set");
    if (phi_.empty()) phi_.push_back(Eigen::MatrixXd::Zero(m, m));
    for (const auto& p : phi_)
      if (p.rows() != m || p.cols() != m) throw ValidationError("lag matrix has wrong dimensions");
    if (omega_.size() != m) throw ValidationError("noise variance vector has wrong length");
    for (Eigen::Index v = 0; v < m; ++v) {
      if (!(omega_(v) > 0.0)) throw ValidationError("noise variance of " + graph_.name(v) + " must be positive");
    }
    for (std::size_t k = 0; k < phi_.size(); ++k) {
      for (Vertex v = 0; v < graph_.size(); ++v) {
        for (Vertex u = 0; u < graph_.size(); ++u) {
          const double c = phi_[k](v, u);
          if (c == 0.0) continue;
          if (!std::isfinite(c)) throw ValidationError("non-finite coefficient");
          const bool ok = k == 0 ? contemp_.has_edge(u, v) : (u == v || graph_.has_edge(u, v));
          if (!ok) {
            throw ValidationError("coefficient " + graph_.name(u) + "->" + graph_.name(v) + " at lag " +
                                  std::to_string(k) + " is not allowed by the graph");
          }
        }
      }
    }
    // Trailing all-zero lags do not count towards the order.
    while (phi_.size() > 1 && phi_.back().isZero(0.0)) phi_.pop_back();
  }

  static SvarModel from_coefficients(ProcessGraph graph, ContempGraph contemp,
                                     const std::vector<Coefficient>& coeffs, Eigen::VectorXd noise_vars) {
    int p = 0;
    for (const auto& c : coeffs) p = std::max(p, c.lag);
    const auto m = static_cast<Eigen::Index>(graph.size());
    std::vector<Eigen::MatrixXd> phi(static_cast<std::size_t>(p) + 1, Eigen::MatrixXd::Zero(m, m));
    for (const auto& c : coeffs) {
      if (c.lag < 0 || c.driver >= graph.size() || c.target >= graph.size())
        throw ValidationError("malformed coefficient");
      phi[static_cast<std::size_t>(c.lag)](static_cast<Eigen::Index>(c.target), static_cast<Eigen::Index>(c.driver)) = c.value;
    }
    return SvarModel(std::move(graph), std::move(contemp), std::move(phi), std::move(noise_vars));
  }

  const ProcessGraph& graph() const noexcept { return graph_; }
  const ContempGraph& contemp() const noexcept { return contemp_; }
  std::size_t dim() const noexcept { return graph_.size(); }

  /// Largest lag with a nonzero coefficient (0 for a static model).
  int order() const noexcept { return static_cast<int>(phi_.size()) - 1; }

  const Eigen::MatrixXd& lag_matrix(int k) const { return phi_.at(static_cast<std::size_t>(k)); }
  const std::vector<Eigen::MatrixXd>& lag_matrices() const noexcept { return phi_; }
  const Eigen::VectorXd& noise() const noexcept { return omega_; }

  double coeff(Vertex driver, Vertex target, int lag) const {
    if (lag < 0 || lag > order()) return 0.0;
    return phi_[static_cast<std::size_t>(lag)](static_cast<Eigen::Index>(target), static_cast<Eigen::Index>(driver));
  }

  /// Nonzero (lag, value) pairs of the lag polynomial phi_{driver,target}.
  std::vector<std::pair<int, double>> lag_coeffs(Vertex driver, Vertex target) const {
    std::vector<std::pair<int, double>> out;
    for (int k = 0; k <= order(); ++k) {
      const double c = coeff(driver, target, k);
      if (c != 0.0) out.emplace_back(k, c);
    }
    return out;
  }

  std::vector<Coefficient> coefficients() const {
    std::vector<Coefficient> out;
    for (int k = 0; k <= order(); ++k)
      for (Vertex v = 0; v < dim(); ++v)
        for (Vertex u = 0; u < dim(); ++u)
          if (double c = coeff(u, v, k); c != 0.0) out.push_back({u, v, k, c});
    return out;
  }

  /// Reduced-form lag matrices (I - Phi(0))^{-1} Phi(k) for k = 1..order().
  /// Entry 0 of the result is (I - Phi(0))^{-1} itself.
  std::vector<Eigen::MatrixXd> reduced_form() const {
    const auto m = static_cast<Eigen::Index>(dim());
    const Eigen::MatrixXd b = Eigen::MatrixXd::Identity(m, m) - phi_[0];
    Eigen::FullPivLU<Eigen::MatrixXd> lu(b);
    if (!lu.isInvertible()) throw NumericalError("contemporaneous system not invertible");
    std::vector<Eigen::MatrixXd> out;
    out.push_back(lu.inverse());
    for (int k = 1; k <= order(); ++k) out.push_back(out[0] * phi_[static_cast<std::size_t>(k)]);
    return out;
  }

 private:
  ProcessGraph graph_;
  ContempGraph contemp_;
  std::vector<Eigen::MatrixXd> phi_;
  Eigen::VectorXd omega_;
};

struct StabilityReport {
  bool stable = false;
  double spectral_radius = 0.0;
  /// Advisory sufficient condition: every target's sum of |phi| below one.
  bool sum_condition = false;
};

namespace detail {

/// VAR(1) companion matrix of the reduced form, of size m*p (p >= 1).
inline Eigen::MatrixXd companion(const SvarModel& model) {
  const auto reduced = model.reduced_form();
  const auto m = static_cast<Eigen::Index>(model.dim());
  const int p = std::max(1, model.order());
  Eigen::MatrixXd f = Eigen::MatrixXd::Zero(m * p, m * p);
  for (int k = 1; k <= model.order(); ++k) f.block(0, m * (k - 1), m, m) = reduced[static_cast<std::size_t>(k)];
  if (p > 1) f.block(m, 0, m * (p - 1), m * (p - 1)).setIdentity();
  return f;
}

}  // namespace detail

inline constexpr double kStabilityMargin = 1e-8;

inline StabilityReport check_stability(const SvarModel& model) {
  StabilityReport r;
  const Eigen::MatrixXd f = detail::companion(model);
  Eigen::EigenSolver<Eigen::MatrixXd> es(f, false);
  r.spectral_radius = es.eigenvalues().cwiseAbs().maxCoeff();
  r.stable = r.spectral_radius < 1.0 - kStabilityMargin;
  r.sum_condition = true;
  for (Vertex v = 0; v < model.dim(); ++v) {
    double s = 0.0;
    for (int k = 0; k <= model.order(); ++k)
      for (Vertex u = 0; u < model.dim(); ++u) s += std::abs(model.coeff(u, v, k));
    if (!(s < 1.0)) r.sum_condition = false;
  }
  return r;
}

inline void require_stable(const SvarModel& model) {
  const auto r = check_stability(model);
  if (!r.stable)
    throw NumericalError("model is not stable (companion spectral radius " + std::to_string(r.spectral_radius) + ")");
}

/// m x n array of observations, one row per process, one column per time.
struct SeriesSample {
  std::vector<std::string> names;
  Eigen::MatrixXd data;
  std::optional<std::uint64_t> seed;

  std::size_t dim() const { return static_cast<std::size_t>(data.rows()); }
  std::size_t length() const { return static_cast<std::size_t>(data.cols()); }
};

struct SimulationOptions {
  std::size_t length = 500;  // T
  std::size_t burn_in = 1000;
  std::uint64_t seed = 0;
  /// Extra leading columns so that T rows remain after lagging; defaults to
  /// the model order.
  std::optional<int> presample;
};

/// Draws Gaussian noise in vertex order per time step and iterates the
/// structural recursion along the contemporaneous topological order.
/// Returns T + q columns after discarding the burn-in.
inline SeriesSample simulate(const SvarModel& model, const SimulationOptions& opt) {
  require_stable(model);
  const auto m = static_cast<Eigen::Index>(model.dim());
  const int p = model.order();
  const int q = opt.presample.value_or(p);
  if (q < 0) throw ValidationError("presample length must be non-negative");
  const auto keep = static_cast<Eigen::Index>(opt.length) + q;
  const auto total = keep + static_cast<Eigen::Index>(opt.burn_in) + p;
  const auto order = topological_order(model.contemp());

  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::VectorXd sd = model.noise().cwiseSqrt();

  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(m, total);
  Eigen::VectorXd eta(m);
  for (Eigen::Index t = p; t < total; ++t) {
    for (Eigen::Index v = 0; v < m; ++v) eta(v) = sd(v) * normal(rng);
    for (Vertex vv : order) {
      const auto v = static_cast<Eigen::Index>(vv);
      double acc = eta(v);
      for (int k = 0; k <= p; ++k) {
        const auto row = model.lag_matrix(k).row(v);
        acc += row.dot(x.col(t - k));
      }
      x(v, t) = acc;
    }
  }
  SeriesSample out;
  out.names = model.graph().vertices();
  out.data = x.rightCols(keep);
  out.seed = opt.seed;
  return out;
}

/// Autocovariance sequence Sigma(k) = E[X(t) X(t-k)^T], stored for
/// k = 0..max_lag; negative lags are served as transposes.
class Acs {
 public:
  Acs() = default;
  explicit Acs(std::vector<Eigen::MatrixXd> nonnegative) : lags_(std::move(nonnegative)) {
    if (lags_.empty()) throw ValidationError("empty autocovariance sequence");
  }

  int max_lag() const noexcept { return static_cast<int>(lags_.size()) - 1; }
  std::size_t dim() const { return static_cast<std::size_t>(lags_.front().rows()); }

  Eigen::MatrixXd at(int k) const {
    if (std::abs(k) > max_lag()) throw ValidationError("autocovariance lag out of range");
    return k >= 0 ? lags_[static_cast<std::size_t>(k)] : Eigen::MatrixXd(lags_[static_cast<std::size_t>(-k)].transpose());
  }

  /// Cov(X_a(t - ka), X_b(t - kb)).
  double cov(Vertex a, int ka, Vertex b, int kb) const {
    const int d = kb - ka;
    const auto ia = static_cast<Eigen::Index>(a);
    const auto ib = static_cast<Eigen::Index>(b);
    return d >= 0 ? lags_[static_cast<std::size_t>(d)](ia, ib) : lags_[static_cast<std::size_t>(-d)](ib, ia);
  }

  /// Block matrix [Sigma(j - i)]_{i,j in [lo, hi]}.
  Eigen::MatrixXd block_toeplitz(int lo, int hi) const {
    const auto m = static_cast<Eigen::Index>(dim());
    const Eigen::Index n = hi - lo + 1;
    Eigen::MatrixXd out(m * n, m * n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) out.block(i * m, j * m, m, m) = at(static_cast<int>(j - i));
    return out;
  }

 private:
  std::vector<Eigen::MatrixXd> lags_;
};

namespace detail {

/// Solves G = F G F^T + Q. Kronecker vectorisation for small systems,
/// doubling iteration once (m p)^2 unknowns get large.
inline Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& f, const Eigen::MatrixXd& q) {
  const Eigen::Index n = f.rows();
  if (n <= 32) {
    Eigen::MatrixXd kron(n * n, n * n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) kron.block(i * n, j * n, n, n) = f(i, j) * f;
    const Eigen::MatrixXd lhs = Eigen::MatrixXd::Identity(n * n, n * n) - kron;
    const Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(q.data(), n * n);
    const Eigen::VectorXd sol = lhs.partialPivLu().solve(rhs);
    Eigen::MatrixXd g = Eigen::Map<const Eigen::MatrixXd>(sol.data(), n, n);
    return 0.5 * (g + g.transpose());
  }
  Eigen::MatrixXd a = f;
  Eigen::MatrixXd g = q;
  for (int it = 0; it < 200; ++it) {
    const Eigen::MatrixXd step = a * g * a.transpose();
    g += step;
    a = a * a;
    if (step.norm() <= 1e-17 * g.norm()) break;
  }
  return 0.5 * (g + g.transpose());
}

}  // namespace detail

/// Population autocovariances of a stable model for |k| <= max_lag: reduce
/// to companion form, solve the lag-0 Lyapunov equation, then extend with
/// the Yule-Walker recursion.
inline Acs acs_from_params(const SvarModel& model, int max_lag) {
  require_stable(model);
  if (max_lag < 0) throw ValidationError("max_lag must be non-negative");
  const auto m = static_cast<Eigen::Index>(model.dim());
  const int p = std::max(1, model.order());
  const auto reduced = model.reduced_form();
  const Eigen::MatrixXd omega_reduced = reduced[0] * model.noise().asDiagonal() * reduced[0].transpose();

  const Eigen::MatrixXd f = detail::companion(model);
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(m * p, m * p);
  q.topLeftCorner(m, m) = omega_reduced;
  const Eigen::MatrixXd gamma = detail::solve_lyapunov(f, q);

  std::vector<Eigen::MatrixXd> sigma;
  for (int k = 0; k <= std::max(max_lag, p - 1); ++k) {
    if (k < p) {
      // E[X(t) X(t-k)^T] is block (0, k) of the stacked state covariance.
      sigma.push_back(gamma.block(0, m * k, m, m));
    } else {
      Eigen::MatrixXd s = Eigen::MatrixXd::Zero(m, m);
      for (int j = 1; j <= model.order(); ++j) s += reduced[static_cast<std::size_t>(j)] * sigma[static_cast<std::size_t>(k - j)];
      sigma.push_back(s);
    }
  }
  sigma.resize(static_cast<std::size_t>(max_lag) + 1);
  return Acs(std::move(sigma));
}

/// Inverse map: Yule-Walker solve for the reduced form, recursive
/// regression of the reduced-form innovation covariance along the
/// contemporaneous DAG for Phi(0) and Omega, then Phi(k) = (I - Phi(0))
/// times the reduced lag matrix. The returned model uses the complete
/// process graph over the same vertices.
inline SvarModel params_from_acs(const Acs& acs, const ContempGraph& g0, int q) {
  if (q < 1) throw ValidationError("order bound q must be positive");
  if (acs.max_lag() < q) throw ValidationError("autocovariance sequence shorter than q");
  if (acs.dim() != g0.size()) throw ValidationError("autocovariance dimension does not match the graph");
  const auto m = static_cast<Eigen::Index>(acs.dim());

  const Eigen::MatrixXd toeplitz = acs.block_toeplitz(1, q);
  Eigen::LLT<Eigen::MatrixXd> llt(toeplitz);
  if (llt.info() != Eigen::Success) throw NumericalError("ACS outside E_q(m): block Toeplitz matrix not positive definite");
  Eigen::MatrixXd cross(m, m * q);
  for (int j = 1; j <= q; ++j) cross.block(0, m * (j - 1), m, m) = acs.at(j);
  // [Sigma(1) .. Sigma(q)] = [Phi~(1) .. Phi~(q)] * toeplitz, toeplitz symmetric.
  const Eigen::MatrixXd reduced = llt.solve(cross.transpose()).transpose();

  Eigen::MatrixXd omega_reduced = acs.at(0);
  for (int j = 1; j <= q; ++j) omega_reduced -= reduced.block(0, m * (j - 1), m, m) * acs.at(j).transpose();
  omega_reduced = 0.5 * (omega_reduced + omega_reduced.transpose());

  Eigen::MatrixXd phi0 = Eigen::MatrixXd::Zero(m, m);
  Eigen::VectorXd omega(m);
  for (Vertex vv : topological_order(g0)) {
    const auto v = static_cast<Eigen::Index>(vv);
    const auto& pa = g0.parents(vv);
    if (pa.empty()) {
      omega(v) = omega_reduced(v, v);
      continue;
    }
    const auto n = static_cast<Eigen::Index>(pa.size());
    Eigen::MatrixXd spp(n, n);
    Eigen::VectorXd spv(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      spv(i) = omega_reduced(static_cast<Eigen::Index>(pa[static_cast<std::size_t>(i)]), v);
      for (Eigen::Index j = 0; j < n; ++j)
        spp(i, j) = omega_reduced(static_cast<Eigen::Index>(pa[static_cast<std::size_t>(i)]),
                                  static_cast<Eigen::Index>(pa[static_cast<std::size_t>(j)]));
    }
    Eigen::LLT<Eigen::MatrixXd> pllt(spp);
    if (pllt.info() != Eigen::Success) throw NumericalError("ACS outside E_q(m): innovation covariance not positive definite");
    const Eigen::VectorXd beta = pllt.solve(spv);
    for (Eigen::Index i = 0; i < n; ++i) phi0(v, static_cast<Eigen::Index>(pa[static_cast<std::size_t>(i)])) = beta(i);
    omega(v) = omega_reduced(v, v) - spv.dot(beta);
  }
  for (Eigen::Index v = 0; v < m; ++v)
    if (!(omega(v) > 0.0)) throw NumericalError("ACS outside E_q(m): non-positive innovation variance");

  const Eigen::MatrixXd b = Eigen::MatrixXd::Identity(m, m) - phi0;
  std::vector<Eigen::MatrixXd> phi{phi0};
  for (int k = 1; k <= q; ++k) phi.push_back(b * reduced.block(0, m * (k - 1), m, m));

  std::vector<std::pair<Vertex, Vertex>> complete;
  for (Vertex u = 0; u < g0.size(); ++u)
    for (Vertex v = 0; v < g0.size(); ++v)
      if (u != v) complete.emplace_back(u, v);
  ProcessGraph g(g0.vertices(), complete);
  ContempGraph c(g, g0.edges());
  return SvarModel(std::move(g), std::move(c), std::move(phi), std::move(omega));
}

/// Hermitian spectral density matrix at z.
struct SpectralMatrix {
  Eigen::MatrixXcd value;

  double diagonal(Vertex v) const { return value(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(v)).real(); }

  /// Real representation with 2x2 operator blocks M(S_ij).
  Eigen::MatrixXd real_blocks() const {
    const Eigen::Index m = value.rows();
    Eigen::MatrixXd out(2 * m, 2 * m);
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = 0; j < m; ++j)
        out.block<2, 2>(2 * i, 2 * j) = FreqValue(value(i, j).real(), value(i, j).imag()).op();
    return out;
  }
};

/// S(z) = (I - A(z))^{-1} Omega (I - A(z))^{-*} with A(z) = sum_k Phi(k) z^k.
inline SpectralMatrix spectral_density(const SvarModel& model, FreqValue z) {
  require_stable(model);
  if (!on_unit_circle(z)) throw ValidationError("frequency must lie on the unit circle");
  const auto m = static_cast<Eigen::Index>(model.dim());
  Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(m, m);
  for (int k = 0; k <= model.order(); ++k) {
    const FreqValue zk = power(z, k);
    a += std::complex<double>(zk.re, zk.im) * model.lag_matrix(k).cast<std::complex<double>>();
  }
  const Eigen::MatrixXcd b = Eigen::MatrixXcd::Identity(m, m) - a;
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(b);
  if (std::abs(lu.determinant()) < 1e-12)
    throw PoleError("transfer matrix singular at angle " + std::to_string(angle_of(z)));
  const Eigen::MatrixXcd binv = lu.inverse();
  SpectralMatrix s;
  s.value = binv * model.noise().cast<std::complex<double>>().asDiagonal() * binv.adjoint();
  return s;
}

}  // namespace specaus
