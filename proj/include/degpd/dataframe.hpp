#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "degpd/errors.hpp"

// Column-oriented numeric table with CSV I/O (header row, UTF-8, '.' decimal
// separator). Missing cells (empty, "NA", "NaN") become NaN; rows with
// missing values in the columns a command actually uses are dropped with a
// reported count.

namespace degpd {

struct DataFrame {
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;

  std::size_t n_rows() const { return columns.empty() ? 0 : columns[0].size(); }
  std::size_t n_cols() const { return columns.size(); }

  int column_index(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return static_cast<int>(i);
    return -1;
  }

  const std::vector<double>& column(const std::string& name) const {
    const int idx = column_index(name);
    if (idx < 0) throw ConfigError("unknown column: " + name);
    return columns[idx];
  }

  bool has_column(const std::string& name) const { return column_index(name) >= 0; }
};

namespace detail {

inline double parse_cell(const std::string& cell) {
  std::string s = cell;
  const auto notspace = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), notspace));
  s.erase(std::find_if(s.rbegin(), s.rend(), notspace).base(), s.end());
  if (s.empty() || s == "NA" || s == "na" || s == "NaN" || s == "nan")
    return std::numeric_limits<double>::quiet_NaN();
  std::size_t pos = 0;
  double v;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw DataError("cannot parse numeric cell: '" + cell + "'");
  }
  if (pos != s.size())
    throw DataError("cannot parse numeric cell: '" + cell + "'");
  return v;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  cells.push_back(cur);
  return cells;
}

}  // namespace detail

inline DataFrame read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty CSV file: " + path);
  DataFrame df;
  for (auto& name : detail::split_csv_line(line)) df.names.push_back(name);
  df.columns.resize(df.names.size());
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != df.names.size())
      throw DataError("row " + std::to_string(row) + " has " +
                      std::to_string(cells.size()) + " cells, expected " +
                      std::to_string(df.names.size()));
    for (std::size_t j = 0; j < cells.size(); ++j)
      df.columns[j].push_back(detail::parse_cell(cells[j]));
  }
  return df;
}

inline void write_csv(const DataFrame& df, std::ostream& out) {
  out.precision(17);
  for (std::size_t j = 0; j < df.names.size(); ++j)
    out << (j ? "," : "") << df.names[j];
  out << '\n';
  for (std::size_t i = 0; i < df.n_rows(); ++i) {
    for (std::size_t j = 0; j < df.n_cols(); ++j) {
      out << (j ? "," : "");
      const double v = df.columns[j][i];
      if (std::isnan(v)) {
        out << "NA";
      } else if (v == std::floor(v) && std::fabs(v) < 1e15) {
        out << static_cast<long long>(v);
      } else {
        out << v;
      }
    }
    out << '\n';
  }
}

inline void write_csv(const DataFrame& df, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path);
  write_csv(df, out);
}

/// Drop rows with a missing value in any of the listed columns; returns the
/// number of rows removed.
inline std::size_t drop_missing(DataFrame& df, const std::vector<std::string>& used) {
  std::vector<int> idx;
  for (const auto& name : used) {
    const int j = df.column_index(name);
    if (j < 0) throw ConfigError("unknown column: " + name);
    idx.push_back(j);
  }
  const std::size_t n = df.n_rows();
  std::vector<bool> keep(n, true);
  std::size_t dropped = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (int j : idx) {
      if (std::isnan(df.columns[j][i])) {
        keep[i] = false;
        ++dropped;
        break;
      }
    }
  }
  if (dropped == 0) return 0;
  for (auto& col : df.columns) {
    std::vector<double> next;
    next.reserve(n - dropped);
    for (std::size_t i = 0; i < n; ++i)
      if (keep[i]) next.push_back(col[i]);
    col = std::move(next);
  }
  return dropped;
}

/// Validate and extract a response column of non-negative integers.
inline std::vector<long long> response_counts(const DataFrame& df,
                                              const std::string& name) {
  const auto& col = df.column(name);
  std::vector<long long> out;
  out.reserve(col.size());
  for (std::size_t i = 0; i < col.size(); ++i) {
    const double v = col[i];
    if (!std::isfinite(v) || v < 0.0 || v != std::floor(v))
      throw DataError("response column '" + name + "' must contain non-negative integers (row " +
                      std::to_string(i + 2) + ")");
    out.push_back(static_cast<long long>(v));
  }
  return out;
}

enum class RollMode { Sum, Median };

/// Trailing-window rolling transform. Plain windows cover [i-w+1, i]; lagged
/// windows cover the previous w entries [i-w, i-1], excluding the current
/// one. Entries before the first full window are NaN.
inline std::vector<double> rolling_transform(const std::vector<double>& x,
                                             std::size_t w, RollMode mode,
                                             bool lagged) {
  if (w < 1) throw ConfigError("rolling_transform: window must be >= 1");
  if (w > x.size()) throw ConfigError("rolling_transform: window exceeds data length");
  const std::size_t n = x.size();
  std::vector<double> out(n, std::numeric_limits<double>::quiet_NaN());
  const std::size_t start = lagged ? w : w - 1;
  for (std::size_t i = start; i < n; ++i) {
    const std::size_t lo = lagged ? i - w : i - w + 1;
    const std::size_t hi = lagged ? i - 1 : i;  // inclusive
    if (mode == RollMode::Sum) {
      double s = 0.0;
      for (std::size_t j = lo; j <= hi; ++j) s += x[j];
      out[i] = s;
    } else {
      std::vector<double> window(x.begin() + lo, x.begin() + hi + 1);
      std::sort(window.begin(), window.end());
      const std::size_t m = window.size();
      out[i] = (m % 2 == 1) ? window[m / 2]
                            : 0.5 * (window[m / 2 - 1] + window[m / 2]);
    }
  }
  return out;
}

}  // namespace degpd
