#pragma once

// Workflows behind the command-line verbs: simulate, preprocess, fit and
// analyze. Each returns a JSON summary and writes its files.

#include <cmath>
#include <filesystem>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "specaus/asymptotics.hpp"
#include "specaus/config.hpp"
#include "specaus/estimate.hpp"
#include "specaus/freqdom.hpp"
#include "specaus/inference.hpp"
#include "specaus/io.hpp"
#include "specaus/log.hpp"
#include "specaus/svar.hpp"

namespace specaus {

inline constexpr const char* kResultsSchema = "specaus.results/1";
inline constexpr const char* kFitSchema = "specaus.fit/1";

using nlohmann::json;

struct SimulateOptions {
  std::size_t length = 500;
  std::size_t burn_in = 1000;
  std::uint64_t seed = 0;
};

/// Writes T + q rows, q being the configured order bound.
inline json cmd_simulate(const AnalysisConfig& cfg, const SimulateOptions& opt, const std::filesystem::path& out) {
  if (!cfg.model) throw ValidationError("config has no 'model' section to simulate from");
  const auto st = check_stability(*cfg.model);
  if (!st.stable)
    throw NumericalError("model is not stable (companion spectral radius " + format_number(st.spectral_radius) + ")");
  if (!st.sum_condition) log::info("coefficient sum condition fails; stability rests on the companion spectrum");
  SimulationOptions so;
  so.length = opt.length;
  so.burn_in = opt.burn_in;
  so.seed = opt.seed;
  so.presample = std::max(cfg.lags.order, cfg.model->order());
  const SeriesSample s = simulate(*cfg.model, so);
  write_csv(out, to_table(s));
  return {{"rows", s.length()},
          {"seed", opt.seed},
          {"stable", st.stable},
          {"spectral_radius", st.spectral_radius},
          {"sum_condition", st.sum_condition}};
}

namespace detail {

inline std::vector<double> seasonal_average(const std::vector<double>& values, const std::vector<double>& years,
                                            const std::vector<double>& months, const std::vector<int>& season,
                                            std::vector<double>& labels) {
  // Months listed before a wrap (e.g. 12 in {12, 1, 2}) belong to the season
  // labelled by the following year.
  std::map<int, int> shift;
  for (std::size_t i = 0; i < season.size(); ++i) {
    bool wraps = false;
    for (std::size_t k = i + 1; k < season.size(); ++k)
      if (season[k] < season[i]) wraps = true;
    shift[season[i]] = wraps ? 1 : 0;
  }
  std::map<long, std::map<int, double>> bins;
  for (std::size_t r = 0; r < values.size(); ++r) {
    const int m = static_cast<int>(std::lround(months[r]));
    auto it = shift.find(m);
    if (it == shift.end()) continue;
    const long label = std::lround(years[r]) + it->second;
    if (bins[label].count(m)) throw ValidationError("duplicate month " + std::to_string(m) + " in year " + std::to_string(label));
    bins[label][m] = values[r];
  }
  std::vector<double> out;
  labels.clear();
  for (const auto& [label, ms] : bins) {
    if (ms.size() != season.size()) continue;  // incomplete season
    double acc = 0.0;
    for (const auto& [m, x] : ms) acc += x;
    out.push_back(acc / static_cast<double>(ms.size()));
    labels.push_back(static_cast<double>(label));
  }
  return out;
}

}  // namespace detail

/// Seasonal averaging, mean removal, normalisation by the standard
/// deviation and first differencing, in that order, per column.
inline CsvTable preprocess(const CsvTable& in, const PreprocessSpec& spec) {
  const auto year_col = in.find(spec.year_column);
  const auto month_col = in.find(spec.month_column);
  std::optional<std::vector<int>> season;
  for (const auto& [name, prep] : spec.columns) {
    if (!in.find(name)) throw ValidationError("preprocess: input has no column named '" + name + "'");
    if (prep.seasonal_months.empty()) continue;
    if (season && *season != prep.seasonal_months)
      throw ValidationError("preprocess: all columns must use the same seasonal month list");
    season = prep.seasonal_months;
  }
  std::vector<std::size_t> data_cols;
  for (std::size_t j = 0; j < in.header.size(); ++j)
    if (j != year_col && j != month_col) data_cols.push_back(j);
  if (season) {
    if (!year_col || !month_col)
      throw ValidationError("preprocess: seasonal averaging needs '" + spec.year_column + "' and '" + spec.month_column +
                            "' columns");
    for (std::size_t j : data_cols) {
      auto it = spec.columns.find(in.header[j]);
      if (it == spec.columns.end() || it->second.seasonal_months.empty())
        throw ValidationError("preprocess: seasonal averaging must be configured for every data column or none");
    }
  }

  CsvTable out;
  std::vector<double> labels;
  if (season) {
    out.header.push_back(spec.year_column);
    out.columns.emplace_back();
  } else {
    for (auto c : {year_col, month_col})
      if (c) {
        out.header.push_back(in.header[*c]);
        out.columns.push_back(in.columns[*c]);
      }
  }
  bool any_diff = false;
  for (std::size_t j : data_cols) {
    const auto it = spec.columns.find(in.header[j]);
    if (it != spec.columns.end() && it->second.difference) any_diff = true;
  }
  // Differencing drops the first row of every column.
  if (any_diff)
    for (auto& col : out.columns)
      if (!col.empty()) col.erase(col.begin());
  for (std::size_t j : data_cols) {
    const auto it = spec.columns.find(in.header[j]);
    const ColumnPrep prep = it == spec.columns.end() ? ColumnPrep{} : it->second;
    std::vector<double> x = in.columns[j];
    if (season) {
      x = detail::seasonal_average(x, in.columns[*year_col], in.columns[*month_col], *season, labels);
      out.columns[0] = labels;
      if (any_diff && !out.columns[0].empty()) out.columns[0].erase(out.columns[0].begin());
    }
    if (prep.demean || prep.normalize) {
      if (x.empty()) throw ValidationError("preprocess: column '" + in.header[j] + "' is empty");
      double mean = 0.0;
      for (double v : x) mean += v;
      mean /= static_cast<double>(x.size());
      for (double& v : x) v -= mean;
      if (prep.normalize) {
        double ss = 0.0;
        for (double v : x) ss += v * v;
        const double sd = std::sqrt(ss / static_cast<double>(x.size()));
        if (!(sd > 0.0)) throw ValidationError("preprocess: column '" + in.header[j] + "' has zero variance");
        for (double& v : x) v /= sd;
      }
    }
    if (prep.difference) {
      std::vector<double> d;
      for (std::size_t i = 1; i < x.size(); ++i) d.push_back(x[i] - x[i - 1]);
      x = std::move(d);
    } else if (any_diff && !x.empty()) {
      x.erase(x.begin());
    }
    out.header.push_back(in.header[j]);
    out.columns.push_back(std::move(x));
  }
  return out;
}

inline json cmd_preprocess(const std::filesystem::path& input, const AnalysisConfig& cfg,
                           const std::filesystem::path& out) {
  const CsvTable t = preprocess(read_csv(input), cfg.preprocess);
  write_csv(out, t);
  return {{"rows", t.rows()}, {"columns", t.header}};
}

inline json fit_to_json(const ModelFit& fit) {
  json vs = json::array();
  for (const auto& f : fit.fits) {
    json coeffs = json::array();
    for (std::size_t j = 0; j < f.lags.size(); ++j) {
      const auto i = static_cast<Eigen::Index>(j);
      coeffs.push_back({{"driver", fit.graph.name(f.lags[j].driver)},
                        {"lag", f.lags[j].lag},
                        {"value", f.phi_hat(i)},
                        {"stderr", std::sqrt(f.precision(i, i) / static_cast<double>(f.T))}});
    }
    vs.push_back({{"name", fit.graph.name(f.target)},
                  {"omega_hat", f.omega_hat},
                  {"condition", f.condition},
                  {"coefficients", coeffs}});
  }
  const auto st = check_stability(fit.model);
  return {{"schema", kFitSchema},
          {"T", fit.T},
          {"order", fit.lags.order},
          {"vertices", vs},
          {"stability", {{"stable", st.stable}, {"spectral_radius", st.spectral_radius}}},
          {"warnings", fit.warnings}};
}

inline ModelFit fit_input(const std::filesystem::path& input, const AnalysisConfig& cfg) {
  const SeriesSample s = to_sample(read_csv(input), cfg.graph.vertices());
  return fit_all(s, cfg.lags, cfg.graph, cfg.contemp);
}

inline json cmd_fit(const std::filesystem::path& input, const AnalysisConfig& cfg, const std::filesystem::path& out) {
  const json j = fit_to_json(fit_input(input, cfg));
  write_text(out, j.dump(2) + "\n");
  return j;
}

namespace detail {

/// Vertices whose coefficients enter the estimator of a query.
inline std::set<Vertex> involved(const ModelFit& fit, const QuerySpec& q) {
  std::set<Vertex> out;
  for (const Path& p : q.paths)
    for (std::size_t i = 1; i < p.vertices.size(); ++i) out.insert(p.vertices[i]);
  if (q.kind == QueryKind::kContribution)
    for (Vertex u : ancestors(fit.graph, q.source)) out.insert(u);
  return out;
}

inline json analyze_row(const ModelFit& fit, const QuerySpec& q, double angle, double alpha) {
  const FreqValue z = frequency(angle);
  json row = {{"angle", angle}};
  row["period"] = angle > 0.0 ? json(2.0 * std::numbers::pi / angle) : json(nullptr);
  EffectTest t;
  FreqValue estimate;
  NormInterval ci;
  json extra = json::object();
  switch (q.kind) {
    case QueryKind::kDirect:
    case QueryKind::kPath:
      t = test_path_effect(fit, q.paths.front(), z, alpha);
      estimate = FreqValue::from_vec(t.theta);
      ci = norm_interval(confidence_region(t.theta, t.acov.matrix, fit.T, alpha));
      break;
    case QueryKind::kTotal: {
      t = test_total_effect(fit, q.paths, z, alpha);
      estimate = FreqValue::from_vec(t.theta);
      ci = norm_interval(confidence_region(t.theta, t.acov.matrix, fit.T, alpha));
      try {
        extra["any_path_p_value"] = test_any_path(fit, q.paths, z, alpha).wald.p_value;
      } catch (const Error& e) {
        extra["any_path_p_value"] = nullptr;
        extra["any_path_error"] = e.what();
      }
      break;
    }
    case QueryKind::kContribution: {
      const Contribution c = spectral_contribution(fit.model, q.source, q.target, q.paths, z);
      estimate = FreqValue(c.total);
      json anc = json::array();
      Eigen::VectorXd omega(static_cast<Eigen::Index>(c.per_ancestor.size()));
      for (std::size_t i = 0; i < c.per_ancestor.size(); ++i) {
        const auto& a = c.per_ancestor[i];
        omega(static_cast<Eigen::Index>(i)) = a.weight;
        anc.push_back({{"ancestor", fit.graph.name(a.ancestor)},
                       {"re", a.g.re},
                       {"im", a.g.im},
                       {"magnitude", a.g.abs()},
                       {"contribution", a.weight * a.g.norm_sq()}});
      }
      t = test_spectral_contribution(fit, q.source, q.target, q.paths, z, alpha);
      ci = contribution_interval(t, omega, alpha);
      extra["ancestors"] = anc;
      break;
    }
    case QueryKind::kRobust:
      t = test_robust(fit, q.source, q.target, z, alpha);
      estimate = FreqValue::from_vec(t.theta);
      ci = norm_interval(confidence_region(t.theta, t.acov.matrix, fit.T, alpha));
      break;
  }
  row["re"] = estimate.re;
  row["im"] = estimate.im;
  row["magnitude"] = q.kind == QueryKind::kContribution ? estimate.re : estimate.abs();
  row["lo"] = ci.lo;
  row["hi"] = ci.hi;
  row["statistic"] = t.wald.statistic;
  row["dof"] = t.wald.dof;
  row["p_value"] = t.wald.p_value;
  row["reject"] = t.wald.reject;
  double gmin = std::numeric_limits<double>::infinity();
  for (Vertex x : involved(fit, q)) gmin = std::min(gmin, genericity_check(fit, x, z).min_singular);
  json diag = {{"condition", t.wald.condition}, {"floored", t.wald.floored}};
  diag["genericity_min_singular"] = std::isfinite(gmin) ? json(gmin) : json(nullptr);
  diag["near_degenerate"] = std::isfinite(gmin) && gmin < kGenericityTolerance;
  row["diagnostics"] = diag;
  for (auto& [k, v] : extra.items()) row[k] = v;
  return row;
}

}  // namespace detail

struct AnalyzeOptions {
  std::optional<double> alpha;
  std::optional<std::size_t> grid;
};

/// Results of every query at every frequency. Failures are recorded in the
/// row or record and do not stop the run.
inline json analyze(const ModelFit& fit, const AnalysisConfig& cfg, const AnalyzeOptions& opt = {}) {
  const double alpha = opt.alpha.value_or(cfg.confidence);
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("confidence level must lie in (0, 1)");
  const std::vector<double> angles = opt.grid ? default_grid(*opt.grid) : cfg.angles;
  json records = json::array();
  for (const QuerySpec& q : cfg.queries) {
    json paths = json::array();
    for (const Path& p : q.paths) {
      json names = json::array();
      for (Vertex x : p.vertices) names.push_back(fit.graph.name(x));
      paths.push_back(names);
    }
    json rows = json::array();
    for (double a : angles) {
      try {
        rows.push_back(detail::analyze_row(fit, q, a, alpha));
      } catch (const Error& e) {
        rows.push_back({{"angle", a}, {"error", e.what()}});
      }
    }
    records.push_back({{"id", q.id},
                       {"kind", to_string(q.kind)},
                       {"source", fit.graph.name(q.source)},
                       {"target", fit.graph.name(q.target)},
                       {"paths", paths},
                       {"rows", rows}});
  }
  return {{"schema", kResultsSchema},
          {"T", fit.T},
          {"confidence", alpha},
          {"lag_order", fit.lags.order},
          {"vertices", fit.graph.vertices()},
          {"warnings", fit.warnings},
          {"records", records}};
}

/// Flat table of all rows, 6 significant digits.
inline std::string results_csv(const json& results) {
  std::string s = "id,kind,angle,re,im,magnitude,lo,hi,statistic,p_value,reject\n";
  auto num = [](const json& row, const char* key) {
    return row.contains(key) && row.at(key).is_number() ? format_number(row.at(key).get<double>(), 6) : std::string();
  };
  for (const auto& rec : results.at("records")) {
    for (const auto& row : rec.at("rows")) {
      s += rec.at("id").get<std::string>() + "," + rec.at("kind").get<std::string>();
      for (const char* k : {"angle", "re", "im", "magnitude", "lo", "hi", "statistic", "p_value"}) s += "," + num(row, k);
      s += ",";
      if (row.contains("reject")) s += row.at("reject").get<bool>() ? "1" : "0";
      s += "\n";
    }
  }
  return s;
}

inline json cmd_analyze(const std::filesystem::path& input, const AnalysisConfig& cfg, const std::filesystem::path& out,
                        const AnalyzeOptions& opt = {}) {
  if (cfg.queries.empty()) throw ValidationError("config has no queries to analyze");
  const json results = analyze(fit_input(input, cfg), cfg, opt);
  write_text(out, results.dump(2) + "\n");
  std::filesystem::path csv = out;
  csv.replace_extension(".csv");
  write_text(csv, results_csv(results));
  return results;
}

}  // namespace specaus
