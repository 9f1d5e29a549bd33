#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>

namespace ncm {

/// Kahan-compensated running sum.
class KahanSum {
 public:
  void add(double x) {
    const double y = x - carry_;
    const double t = sum_ + y;
    carry_ = (t - sum_) - y;
    sum_ = t;
  }
  double value() const { return sum_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

/// Coefficient of variation std/|mean|, or nullopt when |mean| is below the
/// guard and the ratio would be meaningless.
inline std::optional<double> guarded_cov(double std_dev, double mean, double mean_guard) {
  if (!(std::abs(mean) >= mean_guard)) return std::nullopt;
  return std_dev / std::abs(mean);
}

/// count / mean / population variance / min / max of a stream of values
/// (pairwise or per-class), without storing the values.
struct PairwiseSummary {
  std::uint64_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;  // sum of squared deviations from mean
  double min = std::numeric_limits<double>::infinity();
  double max = -std::numeric_limits<double>::infinity();

  double variance() const { return count == 0 ? 0.0 : std::max(0.0, m2 / static_cast<double>(count)); }
  double std_dev() const { return std::sqrt(variance()); }
  std::optional<double> cov(double mean_guard) const { return guarded_cov(std_dev(), mean, mean_guard); }

  /// Exact two-pass summary of a block of values with compensated sums.
  static PairwiseSummary of(std::span<const double> values) {
    PairwiseSummary s;
    if (values.empty()) return s;
    KahanSum sum;
    for (double v : values) {
      sum.add(v);
      s.min = std::min(s.min, v);
      s.max = std::max(s.max, v);
    }
    s.count = values.size();
    s.mean = sum.value() / static_cast<double>(s.count);
    KahanSum dev;
    for (double v : values) {
      const double d = v - s.mean;
      dev.add(d * d);
    }
    s.m2 = dev.value();
    return s;
  }

  /// Chan combination of two disjoint summaries. Not commutative in the last
  /// bit, so callers combine in a fixed order.
  void merge(const PairwiseSummary& other) {
    if (other.count == 0) return;
    if (count == 0) {
      *this = other;
      return;
    }
    const double na = static_cast<double>(count);
    const double nb = static_cast<double>(other.count);
    const double n = na + nb;
    const double delta = other.mean - mean;
    mean += delta * (nb / n);
    m2 += other.m2 + delta * delta * (na * nb / n);
    count += other.count;
    min = std::min(min, other.min);
    max = std::max(max, other.max);
  }
};

}  // namespace ncm
