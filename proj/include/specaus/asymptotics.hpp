#pragma once

// Delta-method asymptotic covariances of frequency-domain estimators. All
// covariances refer to sqrt(T) (estimate - truth); divide by T for the
// finite-sample approximation.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "specaus/error.hpp"
#include "specaus/estimate.hpp"
#include "specaus/freq.hpp"
#include "specaus/freqdom.hpp"
#include "specaus/graph.hpp"
#include "specaus/log.hpp"

namespace specaus {

/// Partial derivatives of the link functions of v in the factored form
/// grad h_{u,v} = a_v [A z^{l_u}, A_u z^{l_v}], grad f_v = a_v A_v z^{l_v}.
struct LinkJacobian {
  Vertex target = 0;
  double a_v = 1.0;
  Eigen::Matrix2d A = Eigen::Matrix2d::Identity();
  std::map<Vertex, Eigen::Matrix2d> A_u;
  Eigen::Matrix2d A_v = Eigen::Matrix2d::Identity();
  FreqValue f;
  std::map<Vertex, FreqValue> h;
};

inline LinkJacobian link_jacobians(const SvarModel& model, Vertex v, FreqValue z) {
  LinkJacobian j;
  j.target = v;
  const FreqValue d = FreqValue(1.0) - coeff_poly(model, v, v, z);
  j.f = internal_function(model, v, z);
  j.a_v = 1.0 / d.norm_sq();
  j.A = d.conj().op();
  for (Vertex u : model.graph().parents(v)) {
    const FreqValue h = coeff_poly(model, u, v, z) * j.f;
    j.h[u] = h;
    j.A_u[u] = (h * d.conj()).op();
  }
  j.A_v = (j.f * d.conj()).op();
  return j;
}

/// Columns (Re z^k, Im z^k) for the given lags.
inline Eigen::Matrix<double, 2, Eigen::Dynamic> z_powers(const std::vector<int>& lags, FreqValue z) {
  Eigen::Matrix<double, 2, Eigen::Dynamic> out(2, static_cast<Eigen::Index>(lags.size()));
  for (std::size_t i = 0; i < lags.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = power(z, lags[i]).vec();
  return out;
}

/// Symmetric matrix of 2x2 blocks with labelled block rows.
struct BlockCov {
  std::vector<std::string> labels;
  Eigen::MatrixXd matrix;
  std::size_t T = 0;

  std::size_t blocks() const { return labels.size(); }
  Eigen::Matrix2d block(std::size_t i, std::size_t j) const {
    return matrix.block<2, 2>(2 * static_cast<Eigen::Index>(i), 2 * static_cast<Eigen::Index>(j));
  }
};

enum class Al2Policy { kWarn, kRequire };

namespace detail {

inline void symmetrize(Eigen::MatrixXd& m) { m = 0.5 * (m + m.transpose()); }

/// One factor of a path product and the vertex whose coefficients it
/// depends on. entry is the predecessor on the path, or x itself for the
/// internal-function weight at the source.
struct Factor {
  Vertex x;
  Vertex entry;
  FreqValue value;
};

}  // namespace detail

/// Covariances at one frequency for a fitted model. Per-vertex link
/// covariances are cached, so one instance serves many path queries.
class FreqAcov {
 public:
  FreqAcov(const ModelFit& fit, FreqValue z, Al2Policy policy = Al2Policy::kWarn)
      : fit_(fit), z_(z), policy_(policy), cache_(fit.graph.size()) {
    if (!on_unit_circle(z)) throw ValidationError("frequency must lie on the unit circle");
  }

  FreqValue z() const { return z_; }
  const ModelFit& fit() const { return fit_; }

  /// acov^{L_v}(e1, e2); entries are parents of v or v itself (internal function).
  Eigen::Matrix2d link_block(Vertex v, Vertex e1, Vertex e2) {
    const VertexCache& c = vertex(v);
    Eigen::Matrix2d out = Eigen::Matrix2d::Zero();
    for (const auto& [a, ca] : c.coef.at(e1))
      for (const auto& [b, cb] : c.coef.at(e2)) out += ca * c.pz.at({a, b}) * cb.transpose();
    return out;
  }

  /// Link covariance of v over pa(v) followed by v.
  BlockCov links(Vertex v) {
    std::vector<Vertex> idx = fit_.graph.parents(v);
    idx.push_back(v);
    BlockCov out;
    out.T = fit_.T;
    const auto n = static_cast<Eigen::Index>(idx.size());
    out.matrix.resize(2 * n, 2 * n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Vertex e = idx[static_cast<std::size_t>(i)];
      out.labels.push_back(e == v ? "f_" + fit_.graph.name(v) : "h_" + fit_.graph.name(e) + "," + fit_.graph.name(v));
      for (Eigen::Index j = 0; j < n; ++j)
        out.matrix.block<2, 2>(2 * i, 2 * j) = link_block(v, e, idx[static_cast<std::size_t>(j)]);
    }
    detail::symmetrize(out.matrix);
    return out;
  }

  /// Covariance block of two path estimators; a weighted path carries the
  /// internal function of its source.
  Eigen::Matrix2d path_block(const Path& p, bool weighted_p, const Path& r, bool weighted_r) {
    const auto fp = factors(p, weighted_p);
    const auto fr = factors(r, weighted_r);
    const auto rp = rests(fp);
    const auto rr = rests(fr);
    Eigen::Matrix2d out = Eigen::Matrix2d::Zero();
    for (std::size_t i = 0; i < fp.size(); ++i)
      for (std::size_t j = 0; j < fr.size(); ++j)
        if (fp[i].x == fr[j].x)
          out += rp[i].op() * link_block(fp[i].x, fp[i].entry, fr[j].entry) * rr[j].op().transpose();
    return out;
  }

  Eigen::Matrix2d paths(const Path& p, const Path& r) { return path_block(p, false, r, false); }
  Eigen::Matrix2d weighted_paths(const Path& p, const Path& r) { return path_block(p, true, r, true); }

  Eigen::Matrix2d total(const std::vector<Path>& a, const std::vector<Path>& b) {
    Eigen::Matrix2d out = Eigen::Matrix2d::Zero();
    for (const Path& p : a)
      for (const Path& r : b) out += paths(p, r);
    return out;
  }

  Eigen::Matrix2d weighted_total(const std::vector<Path>& a, const std::vector<Path>& b) {
    Eigen::Matrix2d out = Eigen::Matrix2d::Zero();
    for (const Path& p : a)
      for (const Path& r : b) out += weighted_paths(p, r);
    return out;
  }

  /// Joint covariance of (h^{(pi)})_{pi in paths}.
  BlockCov path_set(const std::vector<Path>& ps) {
    BlockCov out;
    out.T = fit_.T;
    const auto n = static_cast<Eigen::Index>(ps.size());
    out.matrix.resize(2 * n, 2 * n);
    for (Eigen::Index i = 0; i < n; ++i) {
      out.labels.push_back(to_string(fit_.graph, ps[static_cast<std::size_t>(i)]));
      for (Eigen::Index j = 0; j < n; ++j)
        out.matrix.block<2, 2>(2 * i, 2 * j) = paths(ps[static_cast<std::size_t>(i)], ps[static_cast<std::size_t>(j)]);
    }
    detail::symmetrize(out.matrix);
    return out;
  }

  /// Joint covariance of (g^{Pi_u})_{u in anc(v)} with Pi_u = P(u,v) + paths.
  BlockCov contribution(Vertex v, Vertex w, const std::vector<Path>& ps) {
    const SvarModel& model = fit_.model;
    require_path_set(model, ps, v, w);
    const auto anc = ancestors(fit_.graph, v);
    for (const Path& p : ps)
      for (Vertex x : p.vertices)
        if (x != v && std::binary_search(anc.begin(), anc.end(), x))
          throw ValidationError("infinite path family: path " + to_string(fit_.graph, p) + " returns to an ancestor of " +
                                fit_.graph.name(v));
    const FreqValue h = total_effect(model, ps, z_);
    const Eigen::Matrix2d mh = h.op();
    const Eigen::Matrix2d hcov = total(ps, ps);
    std::vector<std::vector<Path>> into(anc.size());
    std::vector<FreqValue> g(anc.size());
    for (std::size_t i = 0; i < anc.size(); ++i) {
      into[i] = enumerate_paths(fit_.graph, anc[i], v);
      g[i] = specaus::weighted_total(model, into[i], z_);
    }
    BlockCov out;
    out.T = fit_.T;
    const auto n = static_cast<Eigen::Index>(anc.size());
    out.matrix.resize(2 * n, 2 * n);
    for (Eigen::Index i = 0; i < n; ++i) {
      out.labels.push_back(fit_.graph.name(anc[static_cast<std::size_t>(i)]));
      for (Eigen::Index j = 0; j < n; ++j) {
        const auto a = static_cast<std::size_t>(i);
        const auto b = static_cast<std::size_t>(j);
        out.matrix.block<2, 2>(2 * i, 2 * j) =
            mh * weighted_total(into[a], into[b]) * mh.transpose() + g[a].op() * hcov * g[b].op().transpose();
      }
    }
    detail::symmetrize(out.matrix);
    return out;
  }

  /// Covariance of the lag polynomials phi_{u,w}(z) over u in pa(w).
  BlockCov lag_polys(Vertex w) {
    const auto& pa = fit_.graph.parents(w);
    BlockCov out;
    out.T = fit_.T;
    const auto n = static_cast<Eigen::Index>(pa.size());
    out.matrix = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Vertex u1 = pa[static_cast<std::size_t>(i)];
      out.labels.push_back("phi_" + fit_.graph.name(u1) + "," + fit_.graph.name(w));
      for (Eigen::Index j = 0; j < n; ++j) {
        const Vertex u2 = pa[static_cast<std::size_t>(j)];
        out.matrix.block<2, 2>(2 * i, 2 * j) = vertex(w).pz_or_zero(u1, u2);
      }
    }
    detail::symmetrize(out.matrix);
    return out;
  }

 private:
  struct VertexCache {
    bool ready = false;
    // P^{L_v}_{a,b}(z) = z^{l_a} P_{a,b} (z^{l_b})^T for drivers a, b of L_v.
    std::map<std::pair<Vertex, Vertex>, Eigen::Matrix2d> pz;
    // coef[e] lists (driver, matrix) terms of the gradient of entry e.
    std::map<Vertex, std::vector<std::pair<Vertex, Eigen::Matrix2d>>> coef;

    Eigen::Matrix2d pz_or_zero(Vertex a, Vertex b) const {
      auto it = pz.find({a, b});
      return it == pz.end() ? Eigen::Matrix2d::Zero() : it->second;
    }
  };

  VertexCache& vertex(Vertex v) {
    VertexCache& c = cache_.at(v);
    if (c.ready) return c;
    const VertexFit& vf = fit_.at(v);
    const LagSet& set = vf.lags;
    const auto drivers = set.drivers();
    for (Vertex a : drivers) {
      if (policy_ == Al2Policy::kRequire && set.lags_of(a).size() == 1)
        throw ValidationError("AL2 violated: driver " + fit_.graph.name(a) + " of " + fit_.graph.name(v) +
                              " has a single lag");
    }
    std::map<Vertex, Eigen::Matrix<double, 2, Eigen::Dynamic>> zl;
    for (Vertex a : drivers) zl.emplace(a, z_powers(set.lags_of(a), z_));
    for (Vertex a : drivers) {
      const auto pa = set.positions_of(a);
      for (Vertex b : drivers) {
        const auto pb = set.positions_of(b);
        Eigen::MatrixXd sub(pa.size(), pb.size());
        for (std::size_t i = 0; i < pa.size(); ++i)
          for (std::size_t j = 0; j < pb.size(); ++j)
            sub(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                vf.precision(static_cast<Eigen::Index>(pa[i]), static_cast<Eigen::Index>(pb[j]));
        c.pz[{a, b}] = zl.at(a) * sub * zl.at(b).transpose();
      }
    }
    const LinkJacobian jac = link_jacobians(fit_.model, v, z_);
    const bool self = !set.lags_of(v).empty();
    auto& own = c.coef[v];
    if (self) own.emplace_back(v, jac.a_v * jac.A_v);
    for (Vertex u : fit_.graph.parents(v)) {
      auto& terms = c.coef[u];
      if (!set.lags_of(u).empty()) terms.emplace_back(u, jac.a_v * jac.A);
      if (self) terms.emplace_back(v, jac.a_v * jac.A_u.at(u));
    }
    c.ready = true;
    return c;
  }

  std::vector<detail::Factor> factors(const Path& p, bool weighted) const {
    require_path(fit_.model, p);
    std::vector<detail::Factor> out;
    const auto& vs = p.vertices;
    if (weighted) out.push_back({vs.front(), vs.front(), internal_function(fit_.model, vs.front(), z_)});
    for (std::size_t i = 1; i < vs.size(); ++i)
      out.push_back({vs[i], vs[i - 1], link_function(fit_.model, vs[i - 1], vs[i], z_)});
    return out;
  }

  // Product of all other factors, by prefix and suffix products; no division.
  static std::vector<FreqValue> rests(const std::vector<detail::Factor>& fs) {
    const std::size_t n = fs.size();
    std::vector<FreqValue> pre(n + 1, FreqValue(1.0)), suf(n + 1, FreqValue(1.0)), out(n);
    for (std::size_t i = 0; i < n; ++i) pre[i + 1] = pre[i] * fs[i].value;
    for (std::size_t i = n; i-- > 0;) suf[i] = fs[i].value * suf[i + 1];
    for (std::size_t i = 0; i < n; ++i) out[i] = pre[i] * suf[i + 1];
    return out;
  }

  const ModelFit& fit_;
  FreqValue z_;
  Al2Policy policy_;
  std::vector<VertexCache> cache_;
};

inline BlockCov acov_links(const ModelFit& fit, Vertex v, FreqValue z, Al2Policy policy = Al2Policy::kWarn) {
  return FreqAcov(fit, z, policy).links(v);
}

inline Eigen::Matrix2d acov_paths(const ModelFit& fit, const Path& p, const Path& r, FreqValue z) {
  return FreqAcov(fit, z).paths(p, r);
}

inline Eigen::Matrix2d acov_weighted_paths(const ModelFit& fit, const Path& p, const Path& r, FreqValue z) {
  return FreqAcov(fit, z).weighted_paths(p, r);
}

inline Eigen::Matrix2d acov_total_effect(const ModelFit& fit, const std::vector<Path>& a, const std::vector<Path>& b,
                                         FreqValue z) {
  return FreqAcov(fit, z).total(a, b);
}

inline BlockCov acov_spectral_contribution(const ModelFit& fit, Vertex v, Vertex w, const std::vector<Path>& ps,
                                           FreqValue z) {
  return FreqAcov(fit, z).contribution(v, w, ps);
}

inline BlockCov acov_lag_polys(const ModelFit& fit, Vertex w, FreqValue z) { return FreqAcov(fit, z).lag_polys(w); }

struct GenericityReport {
  bool z_full_rank = false;
  bool det_a_v_nonzero = false;
  double min_singular = 0.0;
  std::vector<std::string> notes;
};

inline constexpr double kGenericityTolerance = 1e-8;

/// Full-rank check of the block-diagonal power matrix Z = diag(z^{l_a})
/// over the drivers of L_v, and of A_v(z).
inline GenericityReport genericity_check(const ModelFit& fit, Vertex v, FreqValue z) {
  GenericityReport r;
  const LagSet& set = fit.at(v).lags;
  double smin = std::numeric_limits<double>::infinity();
  for (Vertex a : set.drivers()) {
    const auto lags = set.lags_of(a);
    double s = 0.0;
    if (lags.size() >= 2) {
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(z_powers(lags, z));
      s = svd.singularValues()(1);
    }
    if (s < kGenericityTolerance)
      r.notes.push_back("lag columns of " + fit.graph.name(a) + " are rank deficient at angle " +
                        std::to_string(angle_of(z)));
    smin = std::min(smin, s);
  }
  r.min_singular = std::isfinite(smin) ? smin : 0.0;
  r.z_full_rank = r.min_singular >= kGenericityTolerance;
  const LinkJacobian jac = link_jacobians(fit.model, v, z);
  r.det_a_v_nonzero = std::abs(jac.A_v.determinant()) > kPoleTolerance;
  return r;
}

/// M_{J.I} = D - C A^{-1} B for the split of M into rows/columns I and the rest.
inline Eigen::MatrixXd schur_complement(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& i_idx) {
  if (m.rows() != m.cols()) throw ValidationError("Schur complement needs a square matrix");
  std::vector<bool> in_i(static_cast<std::size_t>(m.rows()), false);
  for (Eigen::Index i : i_idx) {
    if (i < 0 || i >= m.rows()) throw ValidationError("index out of range");
    in_i[static_cast<std::size_t>(i)] = true;
  }
  std::vector<Eigen::Index> j_idx;
  for (Eigen::Index j = 0; j < m.rows(); ++j)
    if (!in_i[static_cast<std::size_t>(j)]) j_idx.push_back(j);
  const Eigen::MatrixXd a = m(i_idx, i_idx);
  const Eigen::MatrixXd b = m(i_idx, j_idx);
  const Eigen::MatrixXd c = m(j_idx, i_idx);
  const Eigen::MatrixXd d = m(j_idx, j_idx);
  if (a.size() == 0) return d;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  if (!lu.isInvertible()) throw NumericalError("leading block of the Schur complement is singular");
  return d - c * lu.solve(b);
}

}  // namespace specaus
