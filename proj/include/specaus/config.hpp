#pragma once

// Analysis configuration, read from a JSON document with schema id
// "specaus.config/1". See docs/config.md for the layout.

#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "specaus/error.hpp"
#include "specaus/freq.hpp"
#include "specaus/graph.hpp"
#include "specaus/log.hpp"
#include "specaus/svar.hpp"

namespace specaus {

inline constexpr const char* kConfigSchema = "specaus.config/1";

enum class QueryKind { kDirect, kPath, kTotal, kContribution, kRobust };

inline const char* to_string(QueryKind k) {
  switch (k) {
    case QueryKind::kDirect: return "direct";
    case QueryKind::kPath: return "path";
    case QueryKind::kTotal: return "total";
    case QueryKind::kContribution: return "contribution";
    case QueryKind::kRobust: return "robust";
  }
  return "?";
}

struct QuerySpec {
  std::string id;
  QueryKind kind = QueryKind::kDirect;
  Vertex source = 0;
  Vertex target = 0;
  std::vector<Path> paths;  // resolved path set
};

struct ColumnPrep {
  bool demean = false;
  bool normalize = false;
  bool difference = false;
  std::vector<int> seasonal_months;
};

struct PreprocessSpec {
  std::string year_column = "year";
  std::string month_column = "month";
  std::map<std::string, ColumnPrep> columns;
};

struct AnalysisConfig {
  ProcessGraph graph;
  ContempGraph contemp;
  LagMap lags;
  std::vector<double> angles;
  double confidence = 0.95;
  std::vector<QuerySpec> queries;
  PreprocessSpec preprocess;
  std::optional<SvarModel> model;
};

namespace detail {

using nlohmann::json;

inline const json& need(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw ValidationError(where + ": missing '" + key + "'");
  return j.at(key);
}

template <class T>
T get_as(const json& j, const std::string& where) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ValidationError(where + ": wrong type");
  }
}

inline std::vector<std::pair<std::string, std::string>> edge_list(const json& j, const std::string& where) {
  std::vector<std::pair<std::string, std::string>> out;
  if (!j.is_array()) throw ValidationError(where + ": expected a list of [from, to] pairs");
  for (const auto& e : j) {
    if (!e.is_array() || e.size() != 2) throw ValidationError(where + ": expected [from, to]");
    out.emplace_back(get_as<std::string>(e[0], where), get_as<std::string>(e[1], where));
  }
  return out;
}

inline Vertex vertex_of(const Digraph& g, const json& j, const std::string& where) {
  const auto name = get_as<std::string>(j, where);
  if (auto v = g.find(name)) return *v;
  throw ValidationError(where + ": unknown vertex '" + name + "'");
}

inline std::vector<double> parse_grid(const json& j) {
  if (j.is_null()) return default_grid();
  if (j.contains("angles")) {
    auto a = get_as<std::vector<double>>(j.at("angles"), "frequencies.angles");
    for (double x : a)
      if (!(x >= 0.0 && x <= std::numbers::pi)) throw ValidationError("frequencies.angles: angles must lie in [0, pi]");
    std::sort(a.begin(), a.end());
    return a;
  }
  if (j.contains("periods")) {
    const auto& p = j.at("periods");
    return period_grid(get_as<double>(need(p, "min", "frequencies.periods"), "frequencies.periods.min"),
                       get_as<double>(need(p, "max", "frequencies.periods"), "frequencies.periods.max"),
                       get_as<std::size_t>(need(p, "count", "frequencies.periods"), "frequencies.periods.count"));
  }
  const auto n = j.contains("count") ? get_as<std::size_t>(j.at("count"), "frequencies.count") : 256;
  if (n == 0) throw ValidationError("frequencies.count must be positive");
  return default_grid(n);
}

inline Path parse_path(const Digraph& g, const json& j, const std::string& where) {
  Path p;
  if (!j.is_array() || j.empty()) throw ValidationError(where + ": a path is a nonempty list of vertices");
  for (const auto& x : j) p.vertices.push_back(vertex_of(g, x, where));
  if (!is_valid_path(g, p)) throw ValidationError(where + ": " + to_string(g, p) + " is not a simple directed path");
  return p;
}

inline QuerySpec parse_query(const ProcessGraph& g, const json& j, std::size_t index) {
  const std::string where = "queries[" + std::to_string(index) + "]";
  QuerySpec q;
  q.id = j.contains("id") ? get_as<std::string>(j.at("id"), where + ".id") : "q" + std::to_string(index);
  const auto kind = get_as<std::string>(need(j, "kind", where), where + ".kind");
  if (kind == "direct") q.kind = QueryKind::kDirect;
  else if (kind == "path") q.kind = QueryKind::kPath;
  else if (kind == "total") q.kind = QueryKind::kTotal;
  else if (kind == "contribution") q.kind = QueryKind::kContribution;
  else if (kind == "robust") q.kind = QueryKind::kRobust;
  else throw ValidationError(where + ": unknown kind '" + kind + "'");
  q.source = vertex_of(g, need(j, "source", where), where + ".source");
  q.target = vertex_of(g, need(j, "target", where), where + ".target");

  if (q.kind == QueryKind::kDirect || q.kind == QueryKind::kRobust) {
    if (!g.has_edge(q.source, q.target))
      throw ValidationError(where + ": " + g.name(q.source) + "->" + g.name(q.target) + " is not a process-graph edge");
    q.paths = {Path{{q.source, q.target}}};
    return q;
  }
  if (j.contains("paths")) {
    const auto& ps = j.at("paths");
    if (!ps.is_array()) throw ValidationError(where + ".paths: expected a list of paths");
    for (std::size_t i = 0; i < ps.size(); ++i) {
      Path p = parse_path(g, ps[i], where + ".paths[" + std::to_string(i) + "]");
      if (p.source() != q.source || p.target() != q.target)
        throw ValidationError(where + ": path " + to_string(g, p) + " does not join source and target");
      q.paths.push_back(std::move(p));
    }
  } else {
    q.paths = enumerate_paths(g, q.source, q.target);
  }
  if (q.paths.empty()) throw ValidationError(where + ": empty path set, no testable effect");
  if (q.kind == QueryKind::kPath && q.paths.size() != 1)
    throw ValidationError(where + ": a path query needs exactly one path; give it under 'paths'");
  return q;
}

inline LagMap parse_lags(const ProcessGraph& g, const json& j) {
  LagMap m;
  m.order = get_as<int>(need(j, "order", "lags"), "lags.order");
  std::vector<std::vector<Lag>> sets(g.size());
  if (j.contains("sets")) {
    for (const auto& [target, drivers] : j.at("sets").items()) {
      const Vertex v = vertex_of(g, target, "lags.sets");
      for (const auto& [driver, lags] : drivers.items()) {
        const Vertex u = vertex_of(g, driver, "lags.sets." + target);
        for (int k : get_as<std::vector<int>>(lags, "lags.sets." + target + "." + driver)) sets[v].push_back({u, k});
      }
    }
  }
  for (auto& s : sets) m.sets.emplace_back(std::move(s));
  return m;
}

inline ColumnPrep parse_prep(const json& j, const std::string& where) {
  ColumnPrep c;
  if (j.contains("demean")) c.demean = get_as<bool>(j.at("demean"), where + ".demean");
  if (j.contains("normalize")) c.normalize = get_as<bool>(j.at("normalize"), where + ".normalize");
  if (j.contains("difference")) c.difference = get_as<bool>(j.at("difference"), where + ".difference");
  if (j.contains("seasonal_average")) {
    c.seasonal_months = get_as<std::vector<int>>(j.at("seasonal_average"), where + ".seasonal_average");
    for (int m : c.seasonal_months)
      if (m < 1 || m > 12) throw ValidationError(where + ".seasonal_average: months run from 1 to 12");
  }
  return c;
}

inline SvarModel parse_model(const ProcessGraph& g, const ContempGraph& g0, const json& j) {
  Eigen::VectorXd omega = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(g.size()));
  if (j.contains("noise")) {
    for (const auto& [name, value] : j.at("noise").items())
      omega(static_cast<Eigen::Index>(vertex_of(g, name, "model.noise"))) = get_as<double>(value, "model.noise." + name);
  }
  std::vector<Coefficient> coeffs;
  if (j.contains("coefficients")) {
    for (const auto& c : j.at("coefficients")) {
      coeffs.push_back({vertex_of(g, need(c, "driver", "model.coefficients"), "model.coefficients.driver"),
                        vertex_of(g, need(c, "target", "model.coefficients"), "model.coefficients.target"),
                        get_as<int>(need(c, "lag", "model.coefficients"), "model.coefficients.lag"),
                        get_as<double>(need(c, "value", "model.coefficients"), "model.coefficients.value")});
    }
  }
  return SvarModel::from_coefficients(g, g0, coeffs, omega);
}

}  // namespace detail

inline AnalysisConfig parse_config(const nlohmann::json& j) {
  using detail::need;
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  if (j.contains("schema") && j.at("schema") != kConfigSchema)
    throw ValidationError("unsupported config schema; expected " + std::string(kConfigSchema));
  AnalysisConfig c;
  const auto& gj = need(j, "graph", "config");
  auto names = detail::get_as<std::vector<std::string>>(need(gj, "vertices", "graph"), "graph.vertices");
  c.graph = ProcessGraph(names, gj.contains("edges") ? detail::edge_list(gj.at("edges"), "graph.edges")
                                                     : std::vector<std::pair<std::string, std::string>>{});
  c.contemp = ContempGraph(c.graph, gj.contains("contemporaneous")
                                        ? detail::edge_list(gj.at("contemporaneous"), "graph.contemporaneous")
                                        : std::vector<std::pair<std::string, std::string>>{});
  c.lags = detail::parse_lags(c.graph, need(j, "lags", "config"));
  const auto report = validate_lag_map(c.graph, c.contemp, c.lags);
  if (!report.valid()) {
    const auto& e = report.violations.front();
    throw ValidationError("lags: (" + c.graph.name(std::min(e.driver, c.graph.size() - 1)) + ", " +
                          std::to_string(e.lag) + ") for " + c.graph.name(std::min(e.target, c.graph.size() - 1)) +
                          ": " + e.reason);
  }
  for (const auto& a : report.al2_violations)
    log::warn("driver " + c.graph.name(a.driver) + " of " + c.graph.name(a.target) +
              " has a single lag; link covariances may be degenerate");
  for (const auto& w : report.warnings) log::info(w);

  c.angles = detail::parse_grid(j.contains("frequencies") ? j.at("frequencies") : nlohmann::json());
  if (j.contains("confidence")) c.confidence = detail::get_as<double>(j.at("confidence"), "confidence");
  if (!(c.confidence > 0.0 && c.confidence < 1.0)) throw ValidationError("confidence must lie in (0, 1)");
  if (j.contains("queries")) {
    const auto& qs = j.at("queries");
    for (std::size_t i = 0; i < qs.size(); ++i) c.queries.push_back(detail::parse_query(c.graph, qs[i], i));
  }
  if (j.contains("preprocess")) {
    const auto& pj = j.at("preprocess");
    if (pj.contains("year_column")) c.preprocess.year_column = detail::get_as<std::string>(pj.at("year_column"), "preprocess.year_column");
    if (pj.contains("month_column")) c.preprocess.month_column = detail::get_as<std::string>(pj.at("month_column"), "preprocess.month_column");
    if (pj.contains("columns"))
      for (const auto& [name, spec] : pj.at("columns").items())
        c.preprocess.columns[name] = detail::parse_prep(spec, "preprocess.columns." + name);
  }
  if (j.contains("model")) c.model = detail::parse_model(c.graph, c.contemp, j.at("model"));
  return c;
}

inline AnalysisConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("config is not valid JSON: " + std::string(e.what()));
  }
  return parse_config(j);
}

}  // namespace specaus
