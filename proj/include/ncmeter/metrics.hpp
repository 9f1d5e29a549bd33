#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "ncmeter/accumulate.hpp"
#include "ncmeter/agreement.hpp"
#include "ncmeter/duality.hpp"
#include "ncmeter/pairwise.hpp"
#include "ncmeter/report.hpp"
#include "ncmeter/summary.hpp"
#include "ncmeter/types.hpp"

namespace ncm {

struct MetricsConfig {
  std::uint64_t min_count = 2;
  std::size_t tile = 1024;
  unsigned workers = 1;
  Tolerances tolerances;
};

namespace detail {

inline MetricStats stats_entry(const PairwiseSummary& s, double guard) {
  if (s.count == 0) return MetricStats{std::nullopt, std::nullopt, std::nullopt, 0};
  return MetricStats{s.mean, s.std_dev(), s.cov(guard), s.count};
}

// Entry whose headline value is a CoV: the ratio goes in "mean" (null when
// guarded) and the raw std stays alongside it.
inline MetricStats cov_entry(const PairwiseSummary& s, double guard) {
  if (s.count == 0) return MetricStats{std::nullopt, std::nullopt, std::nullopt, 0};
  return MetricStats{s.cov(guard), s.std_dev(), std::nullopt, s.count};
}

}  // namespace detail

/// NC1-NC3 metrics from a statistics checkpoint. Duality entries appear only
/// when a classifier is given.
inline MetricReport compute_metrics(const StatsCheckpoint& stats, const ClassifierSet* classifiers,
                                    const MetricsConfig& cfg) {
  const auto& tol = cfg.tolerances;
  const double guard = tol.cov_mean;
  if (classifiers) {
    if (classifiers->num_classes != stats.num_classes() || classifiers->dim != stats.dim) {
      fail(ErrorKind::data, "classifier is " + std::to_string(classifiers->num_classes) + "x" +
                                std::to_string(classifiers->dim) + " but statistics are " +
                                std::to_string(stats.num_classes()) + "x" + std::to_string(stats.dim));
    }
  }
  auto fin = finalize(stats, cfg.min_count);
  auto geom = build_geometry(stats, fin.global_mean.vector, cfg.min_count, tol.direction);

  PairwiseOptions popt;
  popt.tile = cfg.tile;
  popt.workers = cfg.workers;
  popt.tolerances = tol;
  auto pw = pairwise_summaries(geom, popt);
  auto norms = norm_summary(geom, guard);

  MetricReport r;
  r.num_classes = stats.num_classes();
  r.dim = stats.dim;
  r.included_classes = geom.size();
  r.min_count = cfg.min_count;

  auto& m = r.metrics;
  m["cdnv"] = detail::stats_entry(pw.cdnv, guard);
  m["cdnv_log10"] = detail::stats_entry(pw.cdnv_log10, guard);
  m["norm"] = detail::stats_entry(norms.norms, guard);
  m["log_norm"] = detail::stats_entry(norms.log_norms, guard);
  m["log_norm_cov"] = detail::cov_entry(norms.log_norms, guard);
  m["interference"] = detail::stats_entry(pw.interference, guard);
  m["interference_cov"] = detail::cov_entry(pw.interference, guard);
  m["interference_etf_gap"] = MetricStats::scalar(pw.interference.mean - pw.etf_interference(), pw.interference.count);
  m["log_inv_dist"] = detail::stats_entry(pw.log_inv_dist, guard);
  m["log_inv_dist_cov"] = detail::cov_entry(pw.log_inv_dist, guard);

  nlohmann::json excl = {
      {"empty_classes", fin.exclusions.empty.size()},
      {"no_variance_classes", fin.exclusions.no_variance.size()},
      {"below_min_count_classes", fin.exclusions.below_min_count.size()},
      {"zero_direction_classes", geom.dropped_zero_direction},
      {"global_mean_classes", fin.global_mean.contributing_classes},
      {"variance_classes", pw.variance_classes},
      {"cdnv_degenerate_pairs", pw.cdnv_degenerate},
      {"cdnv_zero_pairs", pw.cdnv_zero},
      {"log_inv_dist_degenerate_pairs", pw.log_inv_dist_degenerate},
  };

  if (classifiers) {
    auto dual = duality_profile(geom, *classifiers, stats.num_classes(), tol.direction, guard);
    m["self_duality"] = detail::stats_entry(dual.similarity_summary, guard);
    m["self_duality_cov"] = detail::cov_entry(dual.similarity_summary, guard);
    m["duality_distance"] = detail::stats_entry(dual.distance_summary, guard);
    excl["zero_weight_classes"] = dual.dropped_zero_weight;
  }

  r.provenance["exclusions"] = excl;
  r.provenance["log_base"] = {{"cdnv_log10", 10}, {"log_norm", "e"}, {"log_inv_dist", "e"}};
  return r;
}

/// NC4 entries for a report.
inline void add_agreement(MetricReport& r, const AgreementResult& a) {
  r.metrics["nc4_agreement"] = MetricStats::scalar(a.rate(), a.samples_evaluated);
  r.metrics["nc4_ties"] =
      MetricStats::scalar(static_cast<double>(a.tied_samples), a.samples_evaluated);
  r.metrics["nc4_ties_linear"] =
      MetricStats::scalar(static_cast<double>(a.linear_ties), a.samples_evaluated);
  r.metrics["nc4_ties_ncc"] = MetricStats::scalar(static_cast<double>(a.ncc_ties), a.samples_evaluated);
  r.metrics["nc4_excluded_classes"] =
      MetricStats::scalar(static_cast<double>(a.excluded_classes), a.excluded_classes);
}

}  // namespace ncm
