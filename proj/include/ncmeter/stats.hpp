#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ncmeter/error.hpp"
#include "ncmeter/parallel.hpp"
#include "ncmeter/summary.hpp"

namespace ncm {

/// Population std / |mean|; nullopt when |mean| < mean_guard.
inline std::optional<double> cov(std::span<const double> values, double mean_guard = 1e-9) {
  if (values.size() < 2) fail(ErrorKind::usage, "CoV needs at least 2 values");
  return PairwiseSummary::of(values).cov(mean_guard);
}

namespace detail {

struct Centered {
  std::vector<double> values;
  double sum_squares = 0.0;
};

inline Centered center(std::span<const double> v) {
  Centered out;
  KahanSum sum;
  for (double x : v) sum.add(x);
  const double mean = sum.value() / static_cast<double>(v.size());
  KahanSum ss;
  for (double x : v) {
    out.values.push_back(x - mean);
    ss.add((x - mean) * (x - mean));
  }
  out.sum_squares = ss.value();
  return out;
}

inline double r2_from_centered(std::span<const double> x, std::span<const double> y, double sxx, double syy) {
  double sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) sxy += x[i] * y[i];
  return std::min(1.0, (sxy * sxy) / (sxx * syy));
}

inline void check_pair(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) fail(ErrorKind::usage, "x and y must have equal length");
  if (x.size() < 3) fail(ErrorKind::usage, "need at least 3 paired observations");
}

}  // namespace detail

/// Squared Pearson correlation, which equals the OLS R^2 of a simple
/// linear regression.
inline double r_squared(std::span<const double> x, std::span<const double> y) {
  detail::check_pair(x, y);
  auto cx = detail::center(x);
  auto cy = detail::center(y);
  if (!(cx.sum_squares > 0.0) || !(cy.sum_squares > 0.0)) {
    fail(ErrorKind::numeric, "R^2 undefined for constant input");
  }
  // The product is summed in a fixed order so swapping x and y gives the same bits.
  return detail::r2_from_centered(cx.values, cy.values, cx.sum_squares, cy.sum_squares);
}

struct PermutationOutcome {
  double observed_r2 = 0.0;
  std::uint64_t trials = 0;
  std::uint64_t exceed_count = 0;
  std::uint64_t seed = 0;

  /// (1 + exceed) / (1 + trials); never zero.
  double p_value() const {
    return (1.0 + static_cast<double>(exceed_count)) / (1.0 + static_cast<double>(trials));
  }
  double p_value_unsmoothed() const {
    return static_cast<double>(exceed_count) / static_cast<double>(trials);
  }

  friend bool operator==(const PermutationOutcome&, const PermutationOutcome&) = default;
};

inline constexpr const char* kPermutationRng = "mt19937_64+fisher-yates";

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Uniform integer in [0, bound) by rejection; portable across standard
// libraries, unlike std::uniform_int_distribution.
inline std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t r;
  do {
    r = rng();
  } while (r >= limit);
  return r % bound;
}

template <typename T>
void fisher_yates(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[bounded(rng, i)]);
  }
}

inline constexpr std::uint64_t kTrialsPerBlock = 1024;

}  // namespace detail

/// One-sided permutation test of R^2: each trial shuffles the metric values
/// against the fixed targets and counts R^2 at least as large as observed.
/// Trials are grouped into fixed blocks with their own seed-derived stream,
/// so the outcome does not depend on the worker count.
inline PermutationOutcome permutation_test(std::span<const double> metric, std::span<const double> target,
                                           std::uint64_t trials, std::uint64_t seed, unsigned workers = 1) {
  detail::check_pair(metric, target);
  if (trials < 1) fail(ErrorKind::usage, "permutation test needs at least 1 trial");
  auto cx = detail::center(metric);
  auto cy = detail::center(target);
  if (!(cx.sum_squares > 0.0) || !(cy.sum_squares > 0.0)) {
    fail(ErrorKind::numeric, "permutation test undefined for constant input");
  }
  PermutationOutcome out;
  out.trials = trials;
  out.seed = seed;
  out.observed_r2 = detail::r2_from_centered(cx.values, cy.values, cx.sum_squares, cy.sum_squares);
  const double threshold = out.observed_r2 * (1.0 - 1e-12);

  const std::uint64_t blocks = (trials + detail::kTrialsPerBlock - 1) / detail::kTrialsPerBlock;
  std::vector<std::uint64_t> exceed(blocks, 0);
  parallel_for(blocks, workers, [&](std::size_t b) {
    std::mt19937_64 rng(detail::splitmix64(seed ^ detail::splitmix64(b)));
    std::vector<double> x = cx.values;
    const std::uint64_t begin = b * detail::kTrialsPerBlock;
    const std::uint64_t end = std::min(trials, begin + detail::kTrialsPerBlock);
    for (std::uint64_t t = begin; t < end; ++t) {
      detail::fisher_yates(x, rng);
      if (detail::r2_from_centered(x, cy.values, cx.sum_squares, cy.sum_squares) >= threshold) ++exceed[b];
    }
  });
  for (auto e : exceed) out.exceed_count += e;
  return out;
}

}  // namespace ncm
