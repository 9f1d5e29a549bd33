#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ncmeter/error.hpp"
#include "ncmeter/parallel.hpp"
#include "ncmeter/summary.hpp"
#include "ncmeter/types.hpp"

namespace ncm {

/// Numerical thresholds shared by every metric.
struct Tolerances {
  double direction = 1e-12;   // centered norm at or below this has no direction
  double distance2 = 1e-24;   // squared distance at or below this is a coincident pair
  double tie = 1e-6;          // relative score gap treated as a near-tie
  double cov_mean = 1e-9;     // |mean| below this makes CoV null
};

/// Class means centered about the global mean, for the classes that survive
/// the count and direction filters. Row i describes class `class_ids[i]`.
struct CenteredGeometry {
  std::uint32_t dim = 0;
  std::vector<std::uint32_t> class_ids;
  std::vector<double> centered;    // P x dim, mu_c - mu_bar
  std::vector<double> norms;       // ||mu_c - mu_bar||
  std::vector<double> directions;  // P x dim, unit rows
  std::vector<std::optional<double>> variances;  // sigma_c^2 where N_c >= 2
  std::vector<std::uint32_t> dropped_min_count;
  std::vector<std::uint32_t> dropped_zero_direction;

  std::size_t size() const { return class_ids.size(); }
  std::span<const double> centered_row(std::size_t i) const {
    return std::span<const double>(centered).subspan(i * dim, dim);
  }
  std::span<const double> direction(std::size_t i) const {
    return std::span<const double>(directions).subspan(i * dim, dim);
  }
};

/// Adds one class given its centered mean; returns false (and records the
/// drop) when its norm is at or below `epsilon_dir`.
inline bool add_centered_class(CenteredGeometry& geom, std::uint32_t class_id,
                               std::span<const double> centered, std::optional<double> variance,
                               double epsilon_dir) {
  double norm2 = 0.0;
  for (double v : centered) norm2 += v * v;
  const double norm = std::sqrt(norm2);
  if (!(norm > epsilon_dir)) {
    geom.dropped_zero_direction.push_back(class_id);
    return false;
  }
  geom.class_ids.push_back(class_id);
  geom.centered.insert(geom.centered.end(), centered.begin(), centered.end());
  geom.norms.push_back(norm);
  for (double v : centered) geom.directions.push_back(v / norm);
  geom.variances.push_back(variance);
  return true;
}

inline CenteredGeometry build_geometry(const StatsCheckpoint& stats, std::span<const double> global_mean,
                                       std::uint64_t min_count, double epsilon_dir = 1e-12) {
  if (global_mean.size() != stats.dim) fail(ErrorKind::data, "global mean length does not match dim");
  CenteredGeometry geom;
  geom.dim = stats.dim;
  const std::uint64_t threshold = std::max<std::uint64_t>(1, min_count);
  std::vector<double> row(stats.dim);
  for (std::uint32_t c = 0; c < stats.num_classes(); ++c) {
    const auto& acc = stats.classes[c];
    if (acc.count < threshold) {
      geom.dropped_min_count.push_back(c);
      continue;
    }
    for (std::size_t k = 0; k < stats.dim; ++k) row[k] = acc.mean[k] - global_mean[k];
    add_centered_class(geom, c, row, acc.variance(), epsilon_dir);
  }
  if (geom.size() < 2) {
    fail(ErrorKind::numeric, "fewer than 2 classes survive the count and direction filters");
  }
  return geom;
}

// ---------------------------------------------------------------------------
// Per-class norms (equinormness)

struct NormSummary {
  PairwiseSummary norms;
  PairwiseSummary log_norms;  // natural log
  std::optional<double> log_norm_cov;
};

inline NormSummary norm_summary(const CenteredGeometry& geom, double cov_mean_guard = 1e-9) {
  std::vector<double> logs;
  logs.reserve(geom.size());
  for (double n : geom.norms) logs.push_back(std::log(n));
  NormSummary out;
  out.norms = PairwiseSummary::of(geom.norms);
  out.log_norms = PairwiseSummary::of(logs);
  out.log_norm_cov = out.log_norms.cov(cov_mean_guard);
  return out;
}

// ---------------------------------------------------------------------------
// Pairwise engine

struct PairwiseOptions {
  std::size_t tile = 1024;
  unsigned workers = 1;
  Tolerances tolerances;
  bool cdnv = true;
  bool interference = true;
  bool log_kernel = true;
};

struct PairwiseResult {
  std::uint64_t classes = 0;       // P
  std::uint64_t pairs = 0;         // P(P-1)/2
  std::uint64_t variance_classes = 0;  // classes with sigma^2 defined

  PairwiseSummary cdnv;            // (s_c + s_c')/(2 ||mu_c - mu_c'||^2)
  PairwiseSummary cdnv_log10;      // log10 of the positive CDNV values
  std::uint64_t cdnv_degenerate = 0;  // coincident means, skipped
  std::uint64_t cdnv_zero = 0;        // CDNV == 0, absent from the log10 summary

  PairwiseSummary interference;    // <u_c, u_c'>
  PairwiseSummary log_inv_dist;    // -log ||u_c - u_c'||
  std::uint64_t log_inv_dist_degenerate = 0;

  double etf_interference() const { return -1.0 / (static_cast<double>(classes) - 1.0); }
};

namespace detail {

// Below this fraction of ||a||^2 + ||b||^2 the Gram expansion of ||a - b||^2
// has lost too many digits; recompute from the rows.
inline constexpr double kCancellation = 1e-2;

inline double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double t = a[k] - b[k];
    s += t * t;
  }
  return s;
}

struct TileResult {
  PairwiseSummary cdnv, cdnv_log10, interference, log_inv_dist;
  std::uint64_t cdnv_degenerate = 0, cdnv_zero = 0, log_degenerate = 0;
};

// Gram block G[i][j] = <u_{r0+i}, u_{c0+j}>, each entry summed over k in
// ascending order so it matches a plain dot product bit for bit.
inline void gram_block(const CenteredGeometry& geom, std::size_t r0, std::size_t nr, std::size_t c0,
                       std::size_t nc, std::vector<double>& transposed, std::vector<double>& gram) {
  const std::size_t d = geom.dim;
  transposed.assign(d * nc, 0.0);
  for (std::size_t j = 0; j < nc; ++j) {
    auto u = geom.direction(c0 + j);
    for (std::size_t k = 0; k < d; ++k) transposed[k * nc + j] = u[k];
  }
  gram.assign(nr * nc, 0.0);
  for (std::size_t i = 0; i < nr; ++i) {
    double* g = gram.data() + i * nc;
    auto u = geom.direction(r0 + i);
    for (std::size_t k = 0; k < d; ++k) {
      const double a = u[k];
      const double* t = transposed.data() + k * nc;
      for (std::size_t j = 0; j < nc; ++j) g[j] += a * t[j];
    }
  }
}

}  // namespace detail

/// Summaries of every pairwise class-mean quantity over the P(P-1)/2
/// unordered pairs, computed tile by tile so memory stays O(P d + tile^2).
/// Tiles are summarised independently and combined in tile order, so the
/// result is identical for any worker count.
inline PairwiseResult pairwise_summaries(const CenteredGeometry& geom, const PairwiseOptions& opt = {}) {
  const std::size_t P = geom.size();
  const std::size_t T = std::max<std::size_t>(1, opt.tile);
  const std::size_t nt = (P + T - 1) / T;
  const auto& tol = opt.tolerances;

  std::vector<std::pair<std::size_t, std::size_t>> tiles;
  for (std::size_t a = 0; a < nt; ++a)
    for (std::size_t b = a; b < nt; ++b) tiles.emplace_back(a, b);

  std::vector<detail::TileResult> results(tiles.size());

  parallel_for(tiles.size(), opt.workers, [&](std::size_t t) {
    const auto [a, b] = tiles[t];
    const std::size_t r0 = a * T, nr = std::min(T, P - r0);
    const std::size_t c0 = b * T, nc = std::min(T, P - c0);
    const bool diagonal = a == b;

    std::vector<double> transposed, gram, values;
    detail::gram_block(geom, r0, nr, c0, nc, transposed, gram);
    values.reserve(nr * nc);
    auto& out = results[t];

    auto for_each_pair = [&](auto&& fn) {
      for (std::size_t i = 0; i < nr; ++i) {
        const std::size_t j_begin = diagonal ? i + 1 : 0;
        const double* g = gram.data() + i * nc;
        for (std::size_t j = j_begin; j < nc; ++j) fn(r0 + i, c0 + j, g[j]);
      }
    };

    if (opt.interference) {
      values.clear();
      for_each_pair([&](std::size_t, std::size_t, double g) { values.push_back(g); });
      out.interference = PairwiseSummary::of(values);
    }
    if (opt.log_kernel) {
      values.clear();
      for_each_pair([&](std::size_t i, std::size_t j, double g) {
        double dist2 = std::max(0.0, 2.0 - 2.0 * g);
        if (dist2 < detail::kCancellation * 2.0) dist2 = detail::sq_dist(geom.direction(i), geom.direction(j));
        if (dist2 <= tol.distance2) {
          ++out.log_degenerate;
          return;
        }
        values.push_back(-0.5 * std::log(dist2));
      });
      out.log_inv_dist = PairwiseSummary::of(values);
    }
    if (opt.cdnv) {
      values.clear();
      for_each_pair([&](std::size_t i, std::size_t j, double g) {
        const auto& vi = geom.variances[i];
        const auto& vj = geom.variances[j];
        if (!vi || !vj) return;
        const double ni = geom.norms[i], nj = geom.norms[j];
        const double base = ni * ni + nj * nj;
        double dist2 = base - 2.0 * ni * nj * g;
        if (dist2 < detail::kCancellation * base) dist2 = detail::sq_dist(geom.centered_row(i), geom.centered_row(j));
        if (dist2 <= tol.distance2) {
          ++out.cdnv_degenerate;
          return;
        }
        values.push_back((*vi + *vj) / (2.0 * dist2));
      });
      out.cdnv = PairwiseSummary::of(values);
      std::size_t kept = 0;
      for (double v : values) {
        if (v > 0.0) values[kept++] = std::log10(v);
      }
      out.cdnv_zero = values.size() - kept;
      out.cdnv_log10 = PairwiseSummary::of(std::span<const double>(values.data(), kept));
    }
  });

  PairwiseResult res;
  res.classes = P;
  res.pairs = static_cast<std::uint64_t>(P) * (P - 1) / 2;
  for (const auto& v : geom.variances) res.variance_classes += v.has_value();
  for (const auto& r : results) {
    res.cdnv.merge(r.cdnv);
    res.cdnv_log10.merge(r.cdnv_log10);
    res.interference.merge(r.interference);
    res.log_inv_dist.merge(r.log_inv_dist);
    res.cdnv_degenerate += r.cdnv_degenerate;
    res.cdnv_zero += r.cdnv_zero;
    res.log_inv_dist_degenerate += r.log_degenerate;
  }
  return res;
}

inline PairwiseResult cdnv_summary(const CenteredGeometry& geom, PairwiseOptions opt = {}) {
  opt.cdnv = true;
  opt.interference = opt.log_kernel = false;
  return pairwise_summaries(geom, opt);
}

inline PairwiseResult interference_summary(const CenteredGeometry& geom, PairwiseOptions opt = {}) {
  opt.interference = true;
  opt.cdnv = opt.log_kernel = false;
  return pairwise_summaries(geom, opt);
}

inline PairwiseResult logkernel_summary(const CenteredGeometry& geom, PairwiseOptions opt = {}) {
  opt.log_kernel = true;
  opt.cdnv = opt.interference = false;
  return pairwise_summaries(geom, opt);
}

}  // namespace ncm
