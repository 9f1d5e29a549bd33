#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>

#include <json.hpp>

#include "ncmeter/error.hpp"

namespace ncm {

inline constexpr int kReportVersion = 1;

/// One named metric. Absent fields serialize as JSON null (e.g. a CoV whose
/// mean is too close to zero to divide by).
struct MetricStats {
  std::optional<double> mean;
  std::optional<double> std;
  std::optional<double> cov;
  std::uint64_t count = 0;

  static MetricStats scalar(double value, std::uint64_t count) {
    return MetricStats{value, std::nullopt, std::nullopt, count};
  }

  friend bool operator==(const MetricStats&, const MetricStats&) = default;
};

struct MetricReport {
  std::uint32_t num_classes = 0;
  std::uint32_t dim = 0;
  std::uint64_t included_classes = 0;
  std::uint64_t min_count = 0;
  std::map<std::string, MetricStats> metrics;
  nlohmann::json provenance = nlohmann::json::object();

  friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

namespace detail {

inline nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline std::optional<double> optional_from(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace detail

inline nlohmann::json to_json(const MetricReport& report) {
  nlohmann::json metrics = nlohmann::json::object();
  for (const auto& [name, m] : report.metrics) {
    metrics[name] = {
        {"mean", detail::optional_json(m.mean)},
        {"std", detail::optional_json(m.std)},
        {"cov", detail::optional_json(m.cov)},
        {"count", m.count},
    };
  }
  return {
      {"version", kReportVersion},
      {"num_classes", report.num_classes},
      {"dim", report.dim},
      {"included_classes", report.included_classes},
      {"min_count", report.min_count},
      {"metrics", metrics},
      {"provenance", report.provenance},
  };
}

inline MetricReport report_from_json(const nlohmann::json& j) {
  try {
    if (j.at("version").get<int>() != kReportVersion) {
      fail(ErrorKind::format, "unsupported report version");
    }
    MetricReport r;
    r.num_classes = j.at("num_classes").get<std::uint32_t>();
    r.dim = j.at("dim").get<std::uint32_t>();
    r.included_classes = j.at("included_classes").get<std::uint64_t>();
    r.min_count = j.at("min_count").get<std::uint64_t>();
    for (const auto& [name, m] : j.at("metrics").items()) {
      r.metrics[name] = MetricStats{detail::optional_from(m.at("mean")),
                                    detail::optional_from(m.at("std")),
                                    detail::optional_from(m.at("cov")),
                                    m.at("count").get<std::uint64_t>()};
    }
    r.provenance = j.at("provenance");
    return r;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::format, std::string("malformed report: ") + e.what());
  }
}

// Keys come out sorted (nlohmann's default object is an ordered map) and
// doubles are printed as the shortest decimal that round-trips.
inline void write_report(std::ostream& out, const MetricReport& report) {
  out << to_json(report).dump(2) << '\n';
}

inline MetricReport parse_report(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::format, std::string("report is not valid JSON: ") + e.what());
  }
  return report_from_json(j);
}

}  // namespace ncm
