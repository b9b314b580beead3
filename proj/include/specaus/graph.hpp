#pragma once

// Process graphs, contemporaneous DAGs, lag maps and directed paths.
//
// Vertices are identified by name; internally every routine works on the
// index of the name in the vertex list, and that input order is the
// canonical order used for tie-breaking, regressor layout and output.

#include <algorithm>
#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "specaus/error.hpp"

namespace specaus {

using Vertex = std::size_t;

/// Directed graph without self-loops over a named, ordered vertex list.
class Digraph {
 public:
  Digraph() = default;

  Digraph(std::vector<std::string> vertices, const std::vector<std::pair<Vertex, Vertex>>& edges)
      : names_(std::move(vertices)), parents_(names_.size()), children_(names_.size()) {
    for (std::size_t i = 0; i < names_.size(); ++i) {
      if (!index_.emplace(names_[i], i).second) {
        throw ValidationError("duplicate vertex name '" + names_[i] + "'");
      }
    }
    for (const auto& [u, v] : edges) add_edge(u, v);
  }

  Digraph(std::vector<std::string> vertices,
          const std::vector<std::pair<std::string, std::string>>& edges)
      : Digraph(std::move(vertices), std::vector<std::pair<Vertex, Vertex>>{}) {
    for (const auto& [u, v] : edges) add_edge(index(u), index(v));
  }

  std::size_t size() const noexcept { return names_.size(); }
  const std::vector<std::string>& vertices() const noexcept { return names_; }
  const std::string& name(Vertex v) const { return names_.at(v); }

  std::optional<Vertex> find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  Vertex index(std::string_view name) const {
    if (auto v = find(name)) return *v;
    throw ValidationError("unknown vertex '" + std::string(name) + "'");
  }

  bool has_edge(Vertex u, Vertex v) const {
    const auto& pa = parents_.at(v);
    return std::binary_search(pa.begin(), pa.end(), u);
  }

  /// Parents in canonical vertex order.
  const std::vector<Vertex>& parents(Vertex v) const { return parents_.at(v); }
  const std::vector<Vertex>& children(Vertex v) const { return children_.at(v); }

  std::vector<std::pair<Vertex, Vertex>> edges() const {
    std::vector<std::pair<Vertex, Vertex>> out;
    for (Vertex u = 0; u < size(); ++u)
      for (Vertex v : children_[u]) out.emplace_back(u, v);
    return out;
  }

  std::size_t edge_count() const {
    std::size_t n = 0;
    for (const auto& c : children_) n += c.size();
    return n;
  }

 private:
  void add_edge(Vertex u, Vertex v) {
    if (u >= size() || v >= size()) throw ValidationError("edge endpoint is not a listed vertex");
    if (u == v) throw ValidationError("self-loop on vertex '" + names_[u] + "' is not an edge");
    auto insert_sorted = [](std::vector<Vertex>& xs, Vertex x) {
      auto it = std::lower_bound(xs.begin(), xs.end(), x);
      if (it == xs.end() || *it != x) xs.insert(it, x);
    };
    insert_sorted(parents_[v], u);
    insert_sorted(children_[u], v);
  }

  std::vector<std::string> names_;
  std::map<std::string, Vertex, std::less<>> index_;
  std::vector<std::vector<Vertex>> parents_;
  std::vector<std::vector<Vertex>> children_;
};

/// Kahn's algorithm; among ready vertices the one earliest in input order
/// goes first. Throws ValidationError on a cycle.
inline std::vector<Vertex> topological_order(const Digraph& g) {
  std::vector<std::size_t> indegree(g.size());
  for (Vertex v = 0; v < g.size(); ++v) indegree[v] = g.parents(v).size();
  std::set<Vertex> ready;
  for (Vertex v = 0; v < g.size(); ++v)
    if (indegree[v] == 0) ready.insert(v);
  std::vector<Vertex> order;
  order.reserve(g.size());
  while (!ready.empty()) {
    const Vertex v = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(v);
    for (Vertex c : g.children(v))
      if (--indegree[c] == 0) ready.insert(c);
  }
  if (order.size() != g.size()) throw ValidationError("contemporaneous graph contains a cycle");
  return order;
}

/// Finite process graph G = (V, D); may contain directed cycles.
class ProcessGraph : public Digraph {
 public:
  using Digraph::Digraph;
};

/// Contemporaneous DAG; its edges are a subset of the process-graph edges.
class ContempGraph : public Digraph {
 public:
  ContempGraph() = default;

  /// Empty contemporaneous graph over the process-graph vertices.
  explicit ContempGraph(const ProcessGraph& g) : Digraph(g.vertices(), std::vector<std::pair<Vertex, Vertex>>{}) {}

  ContempGraph(const ProcessGraph& g, const std::vector<std::pair<Vertex, Vertex>>& edges)
      : Digraph(g.vertices(), edges) {
    check(g);
  }

  ContempGraph(const ProcessGraph& g, const std::vector<std::pair<std::string, std::string>>& edges)
      : Digraph(g.vertices(), edges) {
    check(g);
  }

 private:
  void check(const ProcessGraph& g) const {
    for (const auto& [u, v] : edges()) {
      if (!g.has_edge(u, v)) {
        throw ValidationError("contemporaneous edge " + name(u) + "->" + name(v) +
                              " is not a process-graph edge");
      }
    }
    (void)topological_order(*this);
  }
};

/// One time-lagged relation (driver, lag) in a lag set L_v.
struct Lag {
  Vertex driver = 0;
  int lag = 0;
  auto operator<=>(const Lag&) const = default;
};

/// The lags L_v considered for one target, sorted by driver then lag.
class LagSet {
 public:
  LagSet() = default;
  explicit LagSet(std::vector<Lag> lags) : lags_(std::move(lags)) {
    std::sort(lags_.begin(), lags_.end());
    lags_.erase(std::unique(lags_.begin(), lags_.end()), lags_.end());
    for (const Lag& l : lags_)
      if (l.lag < 0) throw ValidationError("negative lag in lag set");
  }

  const std::vector<Lag>& entries() const noexcept { return lags_; }
  std::size_t size() const noexcept { return lags_.size(); }
  bool empty() const noexcept { return lags_.empty(); }
  auto begin() const { return lags_.begin(); }
  auto end() const { return lags_.end(); }
  const Lag& operator[](std::size_t i) const { return lags_[i]; }

  bool contains(Lag l) const { return std::binary_search(lags_.begin(), lags_.end(), l); }

  /// The ordered per-driver lag set {k : (driver, k) in L_v}.
  std::vector<int> lags_of(Vertex driver) const {
    std::vector<int> out;
    for (const Lag& l : lags_)
      if (l.driver == driver) out.push_back(l.lag);
    return out;
  }

  /// Column positions of the given driver's lags within this set.
  std::vector<std::size_t> positions_of(Vertex driver) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < lags_.size(); ++i)
      if (lags_[i].driver == driver) out.push_back(i);
    return out;
  }

  std::vector<Vertex> drivers() const {
    std::vector<Vertex> out;
    for (const Lag& l : lags_)
      if (out.empty() || out.back() != l.driver) out.push_back(l.driver);
    return out;
  }

  int max_lag() const {
    int m = 0;
    for (const Lag& l : lags_) m = std::max(m, l.lag);
    return m;
  }

  bool is_subset_of(const LagSet& other) const {
    return std::includes(other.lags_.begin(), other.lags_.end(), lags_.begin(), lags_.end());
  }

 private:
  std::vector<Lag> lags_;
};

/// Collection L = {L_v} with order bound q.
struct LagMap {
  std::vector<LagSet> sets;
  int order = 1;

  const LagSet& at(Vertex v) const { return sets.at(v); }
  std::size_t size() const noexcept { return sets.size(); }

  bool is_subset_of(const LagMap& other) const {
    if (sets.size() != other.sets.size()) return false;
    for (std::size_t v = 0; v < sets.size(); ++v)
      if (!sets[v].is_subset_of(other.sets[v])) return false;
    return true;
  }
};

struct LagViolation {
  Vertex target;
  Vertex driver;
  int lag;
  std::string reason;
};

struct Al2Violation {
  Vertex target;
  Vertex driver;
  std::size_t lag_count;
};

struct LagMapReport {
  std::vector<LagViolation> violations;
  std::vector<Al2Violation> al2_violations;
  std::vector<std::string> warnings;

  bool valid() const noexcept { return violations.empty(); }
  bool al2() const noexcept { return al2_violations.empty(); }
};

/// Checks the lag-set condition per vertex: lag-0 entries only for
/// contemporaneous parents, positive lags only for the vertex itself or its
/// process-graph parents, all lags within the order bound. AL2 status is
/// reported per (target, driver) pair.
inline LagMapReport validate_lag_map(const ProcessGraph& g, const ContempGraph& g0, const LagMap& lags) {
  LagMapReport report;
  if (lags.size() != g.size()) {
    report.violations.push_back({0, 0, 0, "lag map does not cover every vertex"});
    return report;
  }
  if (lags.order < 1) report.violations.push_back({0, 0, lags.order, "order bound q must be positive"});
  for (Vertex v = 0; v < g.size(); ++v) {
    const LagSet& set = lags.at(v);
    for (const Lag& l : set) {
      if (l.driver >= g.size()) {
        report.violations.push_back({v, l.driver, l.lag, "driver is not a vertex"});
        continue;
      }
      if (l.lag == 0) {
        if (l.driver == v || !g0.has_edge(l.driver, v))
          report.violations.push_back({v, l.driver, l.lag, "lag 0 requires a contemporaneous parent"});
      } else if (l.driver != v && !g.has_edge(l.driver, v)) {
        report.violations.push_back({v, l.driver, l.lag, "driver is neither the target nor a process-graph parent"});
      }
      if (l.lag > lags.order)
        report.violations.push_back({v, l.driver, l.lag, "lag exceeds the order bound"});
    }
    for (Vertex u : set.drivers()) {
      const std::size_t n = set.lags_of(u).size();
      if (n == 1) report.al2_violations.push_back({v, u, n});
    }
    for (Vertex u : g.parents(v)) {
      if (set.lags_of(u).empty())
        report.warnings.push_back("parent " + g.name(u) + " of " + g.name(v) + " has no lags");
    }
  }
  return report;
}

/// Directed path as a vertex sequence; a single vertex is the empty path.
struct Path {
  std::vector<Vertex> vertices;

  Vertex source() const { return vertices.front(); }
  Vertex target() const { return vertices.back(); }
  std::size_t length() const { return vertices.empty() ? 0 : vertices.size() - 1; }
  bool is_empty_path() const { return vertices.size() == 1; }

  bool contains(Vertex x) const {
    return std::find(vertices.begin(), vertices.end(), x) != vertices.end();
  }

  /// Vertex preceding x on the path; nullopt for the source or absent x.
  std::optional<Vertex> predecessor(Vertex x) const {
    for (std::size_t i = 1; i < vertices.size(); ++i)
      if (vertices[i] == x) return vertices[i - 1];
    return std::nullopt;
  }

  /// Concatenation this + other, joined at this->target() == other.source().
  Path concat(const Path& other) const {
    if (target() != other.source()) throw ValidationError("paths do not join");
    Path out{vertices};
    out.vertices.insert(out.vertices.end(), other.vertices.begin() + 1, other.vertices.end());
    return out;
  }

  bool operator==(const Path&) const = default;
};

inline std::string to_string(const Digraph& g, const Path& p) {
  std::string s;
  for (std::size_t i = 0; i < p.vertices.size(); ++i) {
    if (i) s += "->";
    s += g.name(p.vertices[i]);
  }
  return s;
}

inline bool is_valid_path(const Digraph& g, const Path& p) {
  if (p.vertices.empty()) return false;
  for (Vertex x : p.vertices)
    if (x >= g.size()) return false;
  for (std::size_t i = 1; i < p.vertices.size(); ++i)
    if (!g.has_edge(p.vertices[i - 1], p.vertices[i])) return false;
  std::vector<Vertex> sorted = p.vertices;
  std::sort(sorted.begin(), sorted.end());
  return std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end();
}

namespace detail {

inline std::vector<bool> reachable(const Digraph& g, Vertex start, bool forward) {
  std::vector<bool> seen(g.size(), false);
  std::vector<Vertex> stack{start};
  seen[start] = true;
  while (!stack.empty()) {
    const Vertex x = stack.back();
    stack.pop_back();
    for (Vertex y : forward ? g.children(x) : g.parents(x)) {
      if (!seen[y]) {
        seen[y] = true;
        stack.push_back(y);
      }
    }
  }
  return seen;
}

}  // namespace detail

/// All simple directed paths from v to w, in lexicographic order of vertex
/// indices. Contains only the empty path when v == w. Throws when a
/// directed cycle lies on some v -> w route, because the path family is
/// then infinite.
inline std::vector<Path> enumerate_paths(const Digraph& g, Vertex v, Vertex w) {
  if (v >= g.size() || w >= g.size()) throw ValidationError("path endpoint is not a vertex");
  const auto from_v = detail::reachable(g, v, true);
  const auto to_w = detail::reachable(g, w, false);
  // A cycle through vertices that are reachable from v and reach w makes the
  // family infinite; check the induced subgraph for cycles.
  std::vector<Vertex> region;
  for (Vertex x = 0; x < g.size(); ++x)
    if (from_v[x] && to_w[x]) region.push_back(x);
  {
    std::vector<int> state(g.size(), 0);  // 0 new, 1 on stack, 2 done
    std::vector<std::pair<Vertex, std::size_t>> stack;
    for (Vertex root : region) {
      if (state[root] != 0) continue;
      stack.push_back({root, 0});
      state[root] = 1;
      while (!stack.empty()) {
        auto& [x, next] = stack.back();
        const auto& ch = g.children(x);
        if (next < ch.size()) {
          const Vertex y = ch[next++];
          if (!(from_v[y] && to_w[y])) continue;
          if (state[y] == 1)
            throw ValidationError("infinite path family: a directed cycle through " + g.name(y) +
                                  " lies between " + g.name(v) + " and " + g.name(w));
          if (state[y] == 0) {
            state[y] = 1;
            stack.push_back({y, 0});
          }
        } else {
          state[x] = 2;
          stack.pop_back();
        }
      }
    }
  }
  if (v == w) return {Path{{v}}};
  std::vector<Path> out;
  if (!from_v[w]) return out;
  std::vector<Vertex> current{v};
  auto dfs = [&](auto&& self, Vertex x) -> void {
    if (x == w) {
      out.push_back(Path{current});
      return;
    }
    for (Vertex y : g.children(x)) {
      if (!to_w[y]) continue;
      current.push_back(y);
      self(self, y);
      current.pop_back();
    }
  };
  dfs(dfs, v);
  return out;
}

/// {u : P(u, v) nonempty}; always contains v. Sorted by vertex index.
inline std::vector<Vertex> ancestors(const Digraph& g, Vertex v) {
  const auto seen = detail::reachable(g, v, false);
  std::vector<Vertex> out;
  for (Vertex u = 0; u < g.size(); ++u)
    if (seen[u]) out.push_back(u);
  return out;
}

}  // namespace specaus
