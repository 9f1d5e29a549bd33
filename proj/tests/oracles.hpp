#pragma once

// Reference implementations used only by tests. Each one follows the
// defining formula literally and shares no code path with the library.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ncmeter/types.hpp"

namespace oracle {

// ---------------------------------------------------------------------------
// Two-pass class statistics: mean = sum/N, then sum ||h - mean||^2.

struct TwoPassClass {
  std::uint64_t count = 0;
  std::vector<double> mean;
  double m2 = 0.0;
};

inline std::vector<TwoPassClass> two_pass(const std::vector<ncm::EmbeddingRecord>& records, std::size_t C,
                                          std::size_t d) {
  std::vector<TwoPassClass> out(C);
  std::vector<std::vector<long double>> sums(C, std::vector<long double>(d, 0.0L));
  for (auto& c : out) c.mean.assign(d, 0.0);
  for (const auto& r : records) {
    out[r.label].count++;
    for (std::size_t k = 0; k < d; ++k) sums[r.label][k] += r.vector[k];
  }
  for (std::size_t c = 0; c < C; ++c) {
    if (out[c].count == 0) continue;
    for (std::size_t k = 0; k < d; ++k) out[c].mean[k] = static_cast<double>(sums[c][k] / out[c].count);
  }
  std::vector<long double> m2(C, 0.0L);
  for (const auto& r : records) {
    for (std::size_t k = 0; k < d; ++k) {
      long double diff = static_cast<long double>(r.vector[k]) - out[r.label].mean[k];
      m2[r.label] += diff * diff;
    }
  }
  for (std::size_t c = 0; c < C; ++c) out[c].m2 = static_cast<double>(m2[c]);
  return out;
}

// ---------------------------------------------------------------------------
// Naive pairwise loops over explicit vectors.

struct NaiveStats {
  std::uint64_t count = 0;
  double mean = 0.0;
  double variance = 0.0;  // population
};

inline NaiveStats naive_stats(const std::vector<double>& v) {
  NaiveStats s;
  s.count = v.size();
  if (v.empty()) return s;
  long double sum = 0.0L;
  for (double x : v) sum += x;
  long double mean = sum / v.size();
  long double ss = 0.0L;
  for (double x : v) ss += (x - mean) * (x - mean);
  s.mean = static_cast<double>(mean);
  s.variance = static_cast<double>(ss / v.size());
  return s;
}

struct NaivePairwise {
  NaiveStats cdnv, cdnv_log10, interference, log_inv_dist, log_norm;
  std::uint64_t cdnv_degenerate = 0, log_degenerate = 0;
};

// `means` are UNCENTERED class means (rows), `variances` may be empty
// optionals. Classes are all included; centering uses their plain average.
inline NaivePairwise naive_pairwise(const std::vector<std::vector<double>>& means,
                                    const std::vector<std::optional<double>>& variances) {
  const std::size_t P = means.size(), d = means.front().size();
  std::vector<double> mu_bar(d, 0.0);
  for (const auto& m : means)
    for (std::size_t k = 0; k < d; ++k) mu_bar[k] += m[k] / static_cast<double>(P);
  std::vector<std::vector<double>> units(P, std::vector<double>(d));
  std::vector<double> log_norms;
  for (std::size_t c = 0; c < P; ++c) {
    double n2 = 0.0;
    for (std::size_t k = 0; k < d; ++k) n2 += (means[c][k] - mu_bar[k]) * (means[c][k] - mu_bar[k]);
    const double n = std::sqrt(n2);
    for (std::size_t k = 0; k < d; ++k) units[c][k] = (means[c][k] - mu_bar[k]) / n;
    log_norms.push_back(std::log(n));
  }
  std::vector<double> cdnv, cdnv_log, inter, logk;
  NaivePairwise out;
  for (std::size_t a = 0; a < P; ++a) {
    for (std::size_t b = a + 1; b < P; ++b) {
      double dot = 0.0, ud2 = 0.0, md2 = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        dot += units[a][k] * units[b][k];
        ud2 += (units[a][k] - units[b][k]) * (units[a][k] - units[b][k]);
        md2 += (means[a][k] - means[b][k]) * (means[a][k] - means[b][k]);
      }
      inter.push_back(dot);
      const double ud = std::sqrt(ud2);
      if (ud <= 1e-12) out.log_degenerate++;
      else logk.push_back(std::log(1.0 / ud));
      if (variances[a] && variances[b]) {
        if (md2 <= 1e-24) {
          out.cdnv_degenerate++;
        } else {
          const double v = (*variances[a] + *variances[b]) / (2.0 * md2);
          cdnv.push_back(v);
          if (v > 0) cdnv_log.push_back(std::log10(v));
        }
      }
    }
  }
  out.cdnv = naive_stats(cdnv);
  out.cdnv_log10 = naive_stats(cdnv_log);
  out.interference = naive_stats(inter);
  out.log_inv_dist = naive_stats(logk);
  out.log_norm = naive_stats(log_norms);
  return out;
}

// ---------------------------------------------------------------------------
// Nearest class center by literal Euclidean distance.

struct NaiveDecision {
  std::uint32_t id = 0;
  double gap = std::numeric_limits<double>::infinity();  // to the runner-up
  double best = 0.0;                                      // winning score or squared distance
};

inline NaiveDecision nearest_center(const std::vector<float>& h, const std::vector<std::vector<double>>& means,
                                    const std::vector<std::uint32_t>& ids) {
  NaiveDecision best;
  double best_d = std::numeric_limits<double>::infinity(), second = best_d;
  for (std::size_t j = 0; j < ids.size(); ++j) {
    double d2 = 0.0;
    for (std::size_t k = 0; k < h.size(); ++k) d2 += (h[k] - means[j][k]) * (h[k] - means[j][k]);
    const double d = std::sqrt(d2);
    if (d < best_d) {
      second = best_d;
      best_d = d;
      best.id = ids[j];
    } else if (d < second) {
      second = d;
    }
  }
  best.gap = second * second - best_d * best_d;
  best.best = best_d * best_d;
  return best;
}

inline NaiveDecision linear_argmax(const std::vector<float>& h, const ncm::ClassifierSet& w,
                                   const std::vector<std::uint32_t>& ids) {
  NaiveDecision best;
  double best_s = -std::numeric_limits<double>::infinity(), second = best_s;
  for (auto c : ids) {
    double s = w.bias(c);
    for (std::size_t k = 0; k < h.size(); ++k) s += static_cast<double>(w.weights[c * w.dim + k]) * h[k];
    if (s > best_s) {
      second = best_s;
      best_s = s;
      best.id = c;
    } else if (s > second) {
      second = s;
    }
  }
  best.gap = best_s - second;
  best.best = best_s;
  return best;
}

// ---------------------------------------------------------------------------

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("ncmeter_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline bool close(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max(1.0, std::abs(b));
}

}  // namespace oracle
