#pragma once

// Frequency-domain causal quantities as rational functions of the SVAR
// coefficients, evaluated at unit-circle points.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "specaus/error.hpp"
#include "specaus/freq.hpp"
#include "specaus/graph.hpp"
#include "specaus/svar.hpp"

namespace specaus {

inline constexpr double kPoleTolerance = 1e-12;

/// sum_k c_k z^k by Horner's rule.
inline FreqValue lag_poly(const std::vector<std::pair<int, double>>& coeffs, FreqValue z) {
  if (!on_unit_circle(z)) throw ValidationError("frequency must lie on the unit circle");
  if (coeffs.empty()) return {};
  int top = 0;
  for (const auto& [k, c] : coeffs) {
    if (k < 0) throw ValidationError("negative lag in lag polynomial");
    top = std::max(top, k);
  }
  std::vector<double> dense(static_cast<std::size_t>(top) + 1, 0.0);
  for (const auto& [k, c] : coeffs) dense[static_cast<std::size_t>(k)] += c;
  FreqValue acc(dense.back());
  for (int k = top - 1; k >= 0; --k) acc = acc * z + FreqValue(dense[static_cast<std::size_t>(k)]);
  return acc;
}

/// phi_{u,v}(z).
inline FreqValue coeff_poly(const SvarModel& model, Vertex u, Vertex v, FreqValue z) {
  return lag_poly(model.lag_coeffs(u, v), z);
}

/// f_v(z) = 1 / (1 - phi_{v,v}(z)).
inline FreqValue internal_function(const SvarModel& model, Vertex v, FreqValue z) {
  const FreqValue d = FreqValue(1.0) - coeff_poly(model, v, v, z);
  if (d.abs() <= kPoleTolerance)
    throw PoleError("pole of the internal function of " + model.graph().name(v) + " at angle " +
                    std::to_string(angle_of(z)));
  return d.inverse();
}

/// h_{u,v}(z) = phi_{u,v}(z) / (1 - phi_{v,v}(z)).
inline FreqValue link_function(const SvarModel& model, Vertex u, Vertex v, FreqValue z) {
  return coeff_poly(model, u, v, z) * internal_function(model, v, z);
}

inline void require_path(const SvarModel& model, const Path& p) {
  if (!is_valid_path(model.graph(), p)) throw ValidationError("invalid path " + to_string(model.graph(), p));
}

inline FreqValue path_function(const SvarModel& model, const Path& p, FreqValue z) {
  require_path(model, p);
  FreqValue acc(1.0);
  for (std::size_t i = 1; i < p.vertices.size(); ++i) acc *= link_function(model, p.vertices[i - 1], p.vertices[i], z);
  return acc;
}

inline FreqValue total_effect(const SvarModel& model, const std::vector<Path>& paths, FreqValue z) {
  FreqValue acc;
  for (const Path& p : paths) acc += path_function(model, p, z);
  return acc;
}

/// g^{(pi)} = f_source * h^{(pi)}.
inline FreqValue weighted_path_function(const SvarModel& model, const Path& p, FreqValue z) {
  return internal_function(model, p.source(), z) * path_function(model, p, z);
}

/// Sum of weighted path functions over a path set.
inline FreqValue weighted_total(const SvarModel& model, const std::vector<Path>& paths, FreqValue z) {
  FreqValue acc;
  for (const Path& p : paths) acc += weighted_path_function(model, p, z);
  return acc;
}

struct AncestorTerm {
  Vertex ancestor;
  FreqValue g;  // g^{Pi_u}(z)
  double weight;  // omega_u
};

struct Contribution {
  double total = 0.0;
  std::vector<AncestorTerm> per_ancestor;
};

/// Checks that every path in paths runs from v to w.
inline void require_path_set(const SvarModel& model, const std::vector<Path>& paths, Vertex v, Vertex w) {
  for (const Path& p : paths) {
    require_path(model, p);
    if (p.source() != v || p.target() != w)
      throw ValidationError("path " + to_string(model.graph(), p) + " does not run from " + model.graph().name(v) +
                            " to " + model.graph().name(w));
  }
}

/// Spectral contribution of v to w along paths: sum over u in anc(v) of
/// omega_u |g^{P(u,v)} h^{paths}|^2.
inline Contribution spectral_contribution(const SvarModel& model, Vertex v, Vertex w, const std::vector<Path>& paths,
                                          FreqValue z) {
  require_path_set(model, paths, v, w);
  Contribution c;
  const FreqValue h = total_effect(model, paths, z);
  for (Vertex u : ancestors(model.graph(), v)) {
    const FreqValue g = weighted_total(model, enumerate_paths(model.graph(), u, v), z) * h;
    const double om = model.noise()(static_cast<Eigen::Index>(u));
    c.per_ancestor.push_back({u, g, om});
    c.total += om * g.norm_sq();
  }
  return c;
}

/// S_v(z) as the sum of contributions of all ancestors (trek rule).
inline double trek_rule_density(const SvarModel& model, Vertex v, FreqValue z) {
  return spectral_contribution(model, v, v, {Path{{v}}}, z).total;
}

/// A sampled frequency-domain function; frequencies within the pole
/// tolerance are recorded as gaps.
struct EffectCurve {
  std::vector<double> angles;
  std::vector<std::optional<FreqValue>> values;

  std::size_t size() const { return angles.size(); }
  std::optional<double> magnitude(std::size_t i) const {
    if (!values.at(i)) return std::nullopt;
    return values[i]->abs();
  }
};

inline EffectCurve sample_curve(const std::vector<double>& angles, const std::function<FreqValue(FreqValue)>& fn) {
  EffectCurve c;
  c.angles = angles;
  std::sort(c.angles.begin(), c.angles.end());
  for (double a : c.angles) {
    try {
      c.values.emplace_back(fn(frequency(a)));
    } catch (const PoleError&) {
      c.values.emplace_back(std::nullopt);
    }
  }
  return c;
}

}  // namespace specaus
