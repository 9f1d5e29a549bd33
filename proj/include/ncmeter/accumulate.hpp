#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ncmeter/error.hpp"
#include "ncmeter/types.hpp"

namespace ncm {

/// Welford single-pass update: count+1, mean += (h - mean)/count,
/// m2 += <h - mean_old, h - mean_new>. Accumulates in double regardless of
/// the payload type.
template <typename T>
void update(ClassAccumulator& acc, std::span<const T> h) {
  if (h.size() != acc.dim()) {
    fail(ErrorKind::data, "embedding has " + std::to_string(h.size()) + " entries, accumulator dim is " +
                              std::to_string(acc.dim()));
  }
  for (T v : h) {
    if (!std::isfinite(static_cast<double>(v))) fail(ErrorKind::data, "non-finite embedding entry");
  }
  acc.count += 1;
  const double inv_n = 1.0 / static_cast<double>(acc.count);
  double m2_increment = 0.0;
  for (std::size_t k = 0; k < h.size(); ++k) {
    const double x = static_cast<double>(h[k]);
    const double delta_old = x - acc.mean[k];
    acc.mean[k] += delta_old * inv_n;
    m2_increment += delta_old * (x - acc.mean[k]);
  }
  acc.m2 += m2_increment;
}

/// Chan et al. parallel combination. The empty accumulator is an exact
/// identity on either side.
inline ClassAccumulator merge(const ClassAccumulator& a, const ClassAccumulator& b) {
  if (a.dim() != b.dim()) {
    fail(ErrorKind::data, "cannot merge accumulators of dim " + std::to_string(a.dim()) + " and " +
                              std::to_string(b.dim()));
  }
  if (b.count == 0) return a;
  if (a.count == 0) return b;
  ClassAccumulator out(a.dim());
  out.count = a.count + b.count;
  const double na = static_cast<double>(a.count);
  const double nb = static_cast<double>(b.count);
  const double n = static_cast<double>(out.count);
  double dist2 = 0.0;
  for (std::size_t k = 0; k < a.dim(); ++k) {
    const double delta = b.mean[k] - a.mean[k];
    out.mean[k] = a.mean[k] + delta * (nb / n);
    dist2 += delta * delta;
  }
  out.m2 = a.m2 + b.m2 + dist2 * (na * nb / n);
  return out;
}

// ---------------------------------------------------------------------------
// Whole-vocabulary accumulation

/// Grows the checkpoint so that `label` is a valid class id.
inline void ensure_class(StatsCheckpoint& stats, std::uint32_t label) {
  if (label >= stats.classes.size()) {
    stats.classes.resize(std::size_t{label} + 1, ClassAccumulator(stats.dim));
  }
}

template <typename T>
void accumulate(StatsCheckpoint& stats, std::uint32_t label, std::span<const T> h) {
  ensure_class(stats, label);
  update(stats.classes[label], h);
}

inline StatsCheckpoint merge(const StatsCheckpoint& a, const StatsCheckpoint& b) {
  if (a.dim != b.dim) fail(ErrorKind::data, "cannot merge checkpoints with different dim");
  StatsCheckpoint out(std::max(a.num_classes(), b.num_classes()), a.dim);
  for (std::size_t c = 0; c < out.classes.size(); ++c) {
    const bool in_a = c < a.classes.size();
    const bool in_b = c < b.classes.size();
    if (in_a && in_b) {
      out.classes[c] = merge(a.classes[c], b.classes[c]);
    } else if (in_a) {
      out.classes[c] = a.classes[c];
    } else {
      out.classes[c] = b.classes[c];
    }
  }
  return out;
}

/// Merges shard checkpoints pairwise in a fixed balanced tree:
/// (0,1) (2,3) ... then the results again, until one remains. The result
/// depends only on shard order, never on which worker produced a shard.
inline StatsCheckpoint merge_tree(std::vector<StatsCheckpoint> shards) {
  if (shards.empty()) fail(ErrorKind::usage, "no shards to merge");
  while (shards.size() > 1) {
    std::vector<StatsCheckpoint> next;
    next.reserve((shards.size() + 1) / 2);
    for (std::size_t i = 0; i + 1 < shards.size(); i += 2) {
      next.push_back(merge(shards[i], shards[i + 1]));
    }
    if (shards.size() % 2 == 1) next.push_back(std::move(shards.back()));
    shards = std::move(next);
  }
  return std::move(shards.front());
}

// ---------------------------------------------------------------------------
// Finalize

struct GlobalMean {
  std::vector<double> vector;
  std::uint64_t contributing_classes = 0;
};

/// Which classes were left out and why. A class can appear in several lists.
struct ExclusionReport {
  std::uint64_t min_count = 0;
  std::vector<std::uint32_t> empty;           // N_c = 0: no mean
  std::vector<std::uint32_t> no_variance;     // N_c < 2: no unbiased variance
  std::vector<std::uint32_t> below_min_count; // N_c < min_count
};

struct FinalizedStats {
  std::vector<std::optional<double>> variances;  // sigma_c^2, indexed by class id
  std::vector<std::uint32_t> included;           // N_c >= max(1, min_count)
  GlobalMean global_mean;
  ExclusionReport exclusions;
};

/// Computes sigma_c^2 = m2/(N_c - 1) and the unweighted global mean over the
/// included classes: every included class contributes equally, however many
/// samples it has.
inline FinalizedStats finalize(const StatsCheckpoint& stats, std::uint64_t min_count) {
  FinalizedStats out;
  out.exclusions.min_count = min_count;
  const std::uint64_t threshold = std::max<std::uint64_t>(1, min_count);
  out.variances.reserve(stats.classes.size());
  for (std::uint32_t c = 0; c < stats.num_classes(); ++c) {
    const auto& acc = stats.classes[c];
    out.variances.push_back(acc.variance());
    if (acc.count == 0) out.exclusions.empty.push_back(c);
    if (acc.count < 2) out.exclusions.no_variance.push_back(c);
    if (acc.count < min_count) out.exclusions.below_min_count.push_back(c);
    if (acc.count >= threshold) out.included.push_back(c);
  }
  if (out.included.empty()) {
    fail(ErrorKind::data, "no class has at least " + std::to_string(threshold) + " samples");
  }
  std::vector<double> sum(stats.dim, 0.0);
  for (auto c : out.included) {
    const auto& mean = stats.classes[c].mean;
    for (std::size_t k = 0; k < stats.dim; ++k) sum[k] += mean[k];
  }
  const double inv = 1.0 / static_cast<double>(out.included.size());
  for (auto& v : sum) v *= inv;
  out.global_mean = GlobalMean{std::move(sum), out.included.size()};
  return out;
}

}  // namespace ncm
