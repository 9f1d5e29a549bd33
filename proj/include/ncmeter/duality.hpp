#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ncmeter/error.hpp"
#include "ncmeter/pairwise.hpp"
#include "ncmeter/summary.hpp"
#include "ncmeter/types.hpp"

namespace ncm {

/// Alignment of each classifier row with its own centered class mean.
struct DualityProfile {
  std::vector<std::uint32_t> class_ids;
  std::vector<double> similarity;  // <w_c/||w_c||, u_c>, in [-1, 1]
  std::vector<double> distance;    // ||w_c/||w_c|| - u_c||, in [0, 2]
  std::vector<std::uint32_t> dropped_zero_weight;

  PairwiseSummary similarity_summary;
  PairwiseSummary distance_summary;
  std::optional<double> similarity_cov;
};

inline DualityProfile duality_profile(const CenteredGeometry& geom, const ClassifierSet& classifiers,
                                      std::uint32_t num_classes, double epsilon_dir = 1e-12,
                                      double cov_mean_guard = 1e-9) {
  if (classifiers.num_classes != num_classes) {
    fail(ErrorKind::data, "classifier has " + std::to_string(classifiers.num_classes) +
                              " rows but statistics cover " + std::to_string(num_classes) + " classes");
  }
  if (classifiers.dim != geom.dim) {
    fail(ErrorKind::data, "classifier dim " + std::to_string(classifiers.dim) +
                              " does not match embedding dim " + std::to_string(geom.dim));
  }
  DualityProfile out;
  const std::size_t d = geom.dim;
  std::vector<double> w(d);
  for (std::size_t i = 0; i < geom.size(); ++i) {
    const auto c = geom.class_ids[i];
    auto row = classifiers.row(c);
    double norm2 = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      w[k] = row[k];
      norm2 += w[k] * w[k];
    }
    const double norm = std::sqrt(norm2);
    if (!(norm > epsilon_dir)) {
      out.dropped_zero_weight.push_back(c);
      continue;
    }
    auto u = geom.direction(i);
    double dot = 0.0, diff2 = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      const double wk = w[k] / norm;
      dot += wk * u[k];
      diff2 += (wk - u[k]) * (wk - u[k]);
    }
    out.class_ids.push_back(c);
    out.similarity.push_back(std::clamp(dot, -1.0, 1.0));
    out.distance.push_back(std::sqrt(diff2));
  }
  out.similarity_summary = PairwiseSummary::of(out.similarity);
  out.distance_summary = PairwiseSummary::of(out.distance);
  out.similarity_cov = out.similarity_summary.cov(cov_mean_guard);
  return out;
}

}  // namespace ncm
