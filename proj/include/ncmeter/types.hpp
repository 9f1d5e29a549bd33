#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace ncm {

/// One top-layer context embedding together with the id of the token that
/// followed it (its ground-truth class).
struct EmbeddingRecord {
  std::uint32_t label = 0;
  std::vector<float> vector;

  friend bool operator==(const EmbeddingRecord&, const EmbeddingRecord&) = default;
};

/// Linear classification head: row c of `weights` is w_c. Heads exported
/// from models without an additive bias leave `biases` empty, which reads
/// as b_c = 0.
struct ClassifierSet {
  std::uint32_t num_classes = 0;
  std::uint32_t dim = 0;
  std::vector<float> weights;  // row-major num_classes x dim
  std::optional<std::vector<float>> biases;

  std::span<const float> row(std::size_t c) const {
    return std::span<const float>(weights).subspan(c * dim, dim);
  }
  double bias(std::size_t c) const { return biases ? static_cast<double>((*biases)[c]) : 0.0; }

  friend bool operator==(const ClassifierSet&, const ClassifierSet&) = default;
};

/// Running count, mean and sum of squared deviations for one class.
/// `m2` is the scalar sum over samples of ||h - mean||^2.
struct ClassAccumulator {
  std::uint64_t count = 0;
  std::vector<double> mean;
  double m2 = 0.0;

  explicit ClassAccumulator(std::size_t dim = 0) : mean(dim, 0.0) {}

  std::size_t dim() const { return mean.size(); }

  // Unbiased sample variance over all embedding entries; needs two samples.
  std::optional<double> variance() const {
    if (count < 2) return std::nullopt;
    return m2 / static_cast<double>(count - 1);
  }

  friend bool operator==(const ClassAccumulator&, const ClassAccumulator&) = default;
};

/// Per-class statistics for a whole vocabulary; this is both the running
/// accumulator state and the on-disk checkpoint.
struct StatsCheckpoint {
  std::uint32_t dim = 0;
  std::vector<ClassAccumulator> classes;

  StatsCheckpoint() = default;
  StatsCheckpoint(std::uint32_t num_classes, std::uint32_t d)
      : dim(d), classes(num_classes, ClassAccumulator(d)) {}

  std::uint32_t num_classes() const { return static_cast<std::uint32_t>(classes.size()); }

  friend bool operator==(const StatsCheckpoint&, const StatsCheckpoint&) = default;
};

}  // namespace ncm
