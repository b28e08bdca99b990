// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "bridgekit/core/errors.hpp"
#include "bridgekit/data/empirical.hpp"

namespace bridgekit {

namespace csv_detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::optional<double> to_double(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i)
    if (i == line.size() || line[i] == ',') {
      cells.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  return cells;
}

}  // namespace csv_detail

// Rectangular numeric CSV; a first line with any non-numeric cell is a header.
// Blank lines are ignored. With `normalize`, columns are shifted to zero mean
// and scaled to unit population std.
inline EmpiricalDistribution parse_csv(std::istream& is, bool normalize) {
  std::vector<double> values;
  std::size_t cols = 0, rows = 0, line_no = 0;
  std::string line;
  bool first = true;
  while (std::getline(is, line)) {
    ++line_no;
    const auto trimmed = csv_detail::trim(line);
    if (trimmed.empty()) continue;
    if (first && line_no == 1 && trimmed.size() >= 3 && static_cast<unsigned char>(trimmed[0]) == 0xEF)
      line.erase(0, 3);  // UTF-8 BOM
    const auto cells = csv_detail::split(csv_detail::trim(line));
    std::vector<double> row;
    row.reserve(cells.size());
    bool numeric = true;
    for (auto c : cells) {
      auto v = csv_detail::to_double(c);
      if (!v) {
        numeric = false;
        break;
      }
      row.push_back(*v);
    }
    if (!numeric) {
      if (first) {
        first = false;
        cols = cells.size();
        continue;
      }
      throw ParseError("non-numeric cell", line_no);
    }
    if (cols == 0) cols = row.size();
    if (row.size() != cols)
      throw ParseError("expected " + std::to_string(cols) + " columns, found " + std::to_string(row.size()),
                       line_no);
    first = false;
    values.insert(values.end(), row.begin(), row.end());
    ++rows;
  }
  if (rows == 0) throw ParseError("no data rows", line_no);
  Matrix m(rows, cols);
  std::copy(values.begin(), values.end(), m.data());
  EmpiricalDistribution dist{std::move(m), std::nullopt};
  dist.validate();
  return normalize ? dist.normalized() : dist;
}

inline EmpiricalDistribution load_csv(const std::string& path, bool normalize) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open '" + path + "'");
  return parse_csv(is, normalize);
}

inline void write_csv(std::ostream& os, const Matrix& m, const std::vector<std::string>& header = {}) {
  for (std::size_t c = 0; c < header.size(); ++c) os << (c ? "," : "") << header[c];
  if (!header.empty()) os << '\n';
  char buf[32];
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", m(r, c));
      os << (c ? "," : "") << buf;
    }
    os << '\n';
  }
}

inline void write_csv(const std::string& path, const Matrix& m, const std::vector<std::string>& header = {}) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write '" + path + "'");
  write_csv(os, m, header);
}

}  // namespace bridgekit
