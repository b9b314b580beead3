#pragma once

// CSV tables: comma separated, mandatory header, one row per time step.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "specaus/error.hpp"
#include "specaus/svar.hpp"

namespace specaus {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;

  std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }

  std::optional<std::size_t> find(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    return std::nullopt;
  }
};

/// Shortest round-trip decimal form, or `digits` significant digits.
inline std::string format_number(double x, int digits = 0) {
  char buf[64];
  std::to_chars_result r = digits > 0 ? std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, digits)
                                      : std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_number(const std::string& s, std::size_t row, const std::string& col) {
  double v = 0.0;
  const char* first = s.data();
  if (!s.empty() && s.front() == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
    throw ValidationError("row " + std::to_string(row) + ", column '" + col + "': not a number: '" + s + "'");
  return v;
}

inline void require_parent_dir(const std::filesystem::path& path) {
  const auto parent = path.parent_path();
  if (!parent.empty() && !std::filesystem::is_directory(parent))
    throw IoError("output directory does not exist: " + parent.string());
}

}  // namespace detail

inline CsvTable parse_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("CSV input is empty");
  t.header = detail::split(line);
  if (t.header.empty() || t.header.front().empty()) throw ValidationError("CSV header row is missing");
  t.columns.assign(t.header.size(), {});
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split(line);
    if (cells.size() != t.header.size())
      throw ValidationError("row " + std::to_string(row) + " has " + std::to_string(cells.size()) + " fields, expected " +
                            std::to_string(t.header.size()));
    for (std::size_t j = 0; j < cells.size(); ++j) t.columns[j].push_back(detail::parse_number(cells[j], row, t.header[j]));
  }
  return t;
}

inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open input file: " + path.string());
  return parse_csv(in);
}

inline void write_csv(const std::filesystem::path& path, const CsvTable& t, int digits = 0) {
  detail::require_parent_dir(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open output file: " + path.string());
  for (std::size_t j = 0; j < t.header.size(); ++j) out << (j ? "," : "") << t.header[j];
  out << '\n';
  for (std::size_t i = 0; i < t.rows(); ++i) {
    for (std::size_t j = 0; j < t.columns.size(); ++j) out << (j ? "," : "") << format_number(t.columns[j][i], digits);
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  detail::require_parent_dir(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open output file: " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

inline CsvTable to_table(const SeriesSample& s) {
  CsvTable t;
  t.header = s.names;
  for (Eigen::Index v = 0; v < s.data.rows(); ++v) {
    const Eigen::VectorXd row = s.data.row(v).transpose();
    t.columns.emplace_back(row.data(), row.data() + row.size());
  }
  return t;
}

/// Selects the named columns as process rows.
inline SeriesSample to_sample(const CsvTable& t, const std::vector<std::string>& names) {
  SeriesSample s;
  s.names = names;
  s.data.resize(static_cast<Eigen::Index>(names.size()), static_cast<Eigen::Index>(t.rows()));
  for (std::size_t v = 0; v < names.size(); ++v) {
    const auto col = t.find(names[v]);
    if (!col) throw ValidationError("input has no column named '" + names[v] + "'");
    for (std::size_t i = 0; i < t.rows(); ++i)
      s.data(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(i)) = t.columns[*col][i];
  }
  return s;
}

}  // namespace specaus
