#pragma once

#include <algorithm>
#include <cmath>
#include <charconv>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include "ncmeter/error.hpp"

namespace ncm {

/// Cross-run table: one row per trained model, a run_id column followed by
/// named real-valued columns (metrics and the validation-loss target).
/// CSV with a header row, comma separated, '.' decimal point.
struct RunTable {
  std::vector<std::string> columns;  // excluding run_id
  std::vector<std::string> run_ids;
  std::vector<std::vector<double>> rows;

  std::vector<double> column(std::string_view name) const {
    auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) {
      fail(ErrorKind::usage, "run table has no column \"" + std::string(name) + "\"");
    }
    auto idx = static_cast<std::size_t>(it - columns.begin());
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& row : rows) out.push_back(row[idx]);
    return out;
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace detail

inline RunTable read_run_table(std::istream& in) {
  RunTable table;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split_csv(line);
    if (!have_header) {
      if (fields.size() < 2) fail(ErrorKind::format, "run table header needs run_id plus columns");
      for (std::size_t i = 1; i < fields.size(); ++i) table.columns.emplace_back(fields[i]);
      have_header = true;
      continue;
    }
    if (fields.size() != table.columns.size() + 1) {
      fail(ErrorKind::format, "run table line " + std::to_string(line_no) + " has " +
                                  std::to_string(fields.size()) + " fields, expected " +
                                  std::to_string(table.columns.size() + 1));
    }
    table.run_ids.emplace_back(fields[0]);
    std::vector<double> row;
    for (std::size_t i = 1; i < fields.size(); ++i) {
      double v = 0.0;
      auto f = fields[i];
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (f.empty() || ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(v)) {
        fail(ErrorKind::data, "run table line " + std::to_string(line_no) + " column \"" +
                                  table.columns[i - 1] + "\" is missing or not a finite number");
      }
      row.push_back(v);
    }
    table.rows.push_back(std::move(row));
  }
  if (!have_header) fail(ErrorKind::format, "run table is empty");
  return table;
}

}  // namespace ncm
