#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ncmeter/accumulate.hpp"
#include "ncmeter/error.hpp"
#include "ncmeter/ingest.hpp"
#include "ncmeter/types.hpp"

namespace ncm {

enum class SynthGeometry { simplex_etf, orthonormal, uniform_sphere, random_gaussian };
enum class ClassifierMode { tied_to_means, random, perturbed };

inline const char* to_string(SynthGeometry g) {
  switch (g) {
    case SynthGeometry::simplex_etf: return "simplex_etf";
    case SynthGeometry::orthonormal: return "orthonormal";
    case SynthGeometry::uniform_sphere: return "uniform_sphere";
    case SynthGeometry::random_gaussian: return "random_gaussian";
  }
  return "?";
}

inline const char* to_string(ClassifierMode m) {
  switch (m) {
    case ClassifierMode::tied_to_means: return "tied_to_means";
    case ClassifierMode::random: return "random";
    case ClassifierMode::perturbed: return "perturbed";
  }
  return "?";
}

inline SynthGeometry parse_geometry(const std::string& s) {
  if (s == "simplex_etf" || s == "etf") return SynthGeometry::simplex_etf;
  if (s == "orthonormal") return SynthGeometry::orthonormal;
  if (s == "uniform_sphere") return SynthGeometry::uniform_sphere;
  if (s == "random_gaussian") return SynthGeometry::random_gaussian;
  fail(ErrorKind::usage, "unknown geometry \"" + s + "\"");
}

inline ClassifierMode parse_classifier_mode(const std::string& s) {
  if (s == "tied" || s == "tied_to_means") return ClassifierMode::tied_to_means;
  if (s == "random") return ClassifierMode::random;
  if (s == "perturbed") return ClassifierMode::perturbed;
  fail(ErrorKind::usage, "unknown classifier mode \"" + s + "\"");
}

struct SynthSpec {
  std::uint32_t num_classes = 4;
  std::uint32_t dim = 8;
  std::vector<std::uint64_t> samples_per_class;  // one entry per class
  SynthGeometry geometry = SynthGeometry::simplex_etf;
  double noise_sigma = 0.0;
  ClassifierMode classifier_mode = ClassifierMode::tied_to_means;
  double perturb_eps = 0.0;     // relative row perturbation for ClassifierMode::perturbed
  double scale = 1.0;           // norm of each direction before offset
  double offset_scale = 0.0;    // std of a shared offset added to every mean
  bool classifier_bias = false; // emit the bias that makes tied classifiers equal nearest-center
  std::uint64_t seed = 0;       // geometry and classifier
  std::uint64_t sample_stream = 0;  // independent sample draws over the same geometry

  void validate() const {
    if (num_classes < 2) fail(ErrorKind::usage, "synth needs at least 2 classes");
    if (dim < 1) fail(ErrorKind::usage, "synth dim must be >= 1");
    if (samples_per_class.size() != num_classes) {
      fail(ErrorKind::usage, "samples_per_class needs one entry per class");
    }
    if (geometry == SynthGeometry::simplex_etf && num_classes > dim + 1) {
      fail(ErrorKind::usage, "a simplex ETF of " + std::to_string(num_classes) + " classes needs dim >= " +
                                 std::to_string(num_classes - 1));
    }
    if (geometry == SynthGeometry::orthonormal && num_classes > dim) {
      fail(ErrorKind::usage, "orthonormal geometry needs num_classes <= dim");
    }
    if (!(noise_sigma >= 0.0) || !(scale > 0.0) || !(offset_scale >= 0.0) || !(perturb_eps >= 0.0)) {
      fail(ErrorKind::usage, "synth noise, scale, offset and perturbation must be non-negative");
    }
  }
};

struct SynthInstance {
  SynthSpec spec;
  std::vector<double> means;  // C x d, the true class means
  std::vector<double> global_mean;
  ClassifierSet classifiers;
  nlohmann::json truth;

  std::span<const double> mean(std::size_t c) const {
    return std::span<const double>(means).subspan(c * spec.dim, spec.dim);
  }
};

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t x = seed ^ (salt * 0x9E3779B97F4A7C15ull);
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// `count` orthonormal vectors in R^dim (rows), by Gram-Schmidt on Gaussian draws.
inline std::vector<double> random_frame(std::size_t count, std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  std::vector<double> frame(count * dim);
  for (std::size_t r = 0; r < count; ++r) {
    double* v = frame.data() + r * dim;
    while (true) {
      for (std::size_t k = 0; k < dim; ++k) v[k] = normal(rng);
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t q = 0; q < r; ++q) {
          const double* u = frame.data() + q * dim;
          double dot = 0.0;
          for (std::size_t k = 0; k < dim; ++k) dot += v[k] * u[k];
          for (std::size_t k = 0; k < dim; ++k) v[k] -= dot * u[k];
        }
      }
      double n2 = 0.0;
      for (std::size_t k = 0; k < dim; ++k) n2 += v[k] * v[k];
      if (n2 > 1e-20) {
        const double inv = 1.0 / std::sqrt(n2);
        for (std::size_t k = 0; k < dim; ++k) v[k] *= inv;
        break;
      }
    }
  }
  return frame;
}

// Simplex ETF of C unit vectors in R^dim.
//
// The centered standard basis e_c - 1/C spans the (C-1)-dimensional
// subspace orthogonal to the all-ones vector. Its coordinates in the
// Helmert basis h_k = (1,...,1, -k, 0,...,0)/sqrt(k(k+1)), k = 1..C-1, are
// H[k][c] = 1/sqrt(k(k+1)) for c < k, -k/sqrt(k(k+1)) for c = k, 0 after.
// Each column has norm sqrt((C-1)/C); rescaling by sqrt(C/(C-1)) gives unit
// vectors with pairwise inner product -1/(C-1). The coordinates are then
// placed along a random orthonormal frame of C-1 directions in R^dim.
inline std::vector<double> simplex_etf(std::size_t C, std::size_t dim, std::mt19937_64& rng) {
  const auto frame = random_frame(C - 1, dim, rng);
  const double rescale = std::sqrt(static_cast<double>(C) / static_cast<double>(C - 1));
  std::vector<double> out(C * dim, 0.0);
  for (std::size_t c = 0; c < C; ++c) {
    double* v = out.data() + c * dim;
    for (std::size_t k = 1; k < C; ++k) {
      const double norm = 1.0 / std::sqrt(static_cast<double>(k) * static_cast<double>(k + 1));
      double coord = 0.0;
      if (c < k) coord = norm;
      else if (c == k) coord = -static_cast<double>(k) * norm;
      if (coord == 0.0) continue;
      const double* f = frame.data() + (k - 1) * dim;
      for (std::size_t j = 0; j < dim; ++j) v[j] += rescale * coord * f[j];
    }
  }
  return out;
}

}  // namespace detail

/// Builds the class means, classifier and ground-truth sheet. Samples are
/// produced separately by for_each_sample so arbitrarily large streams never
/// sit in memory.
inline SynthInstance generate(const SynthSpec& spec) {
  spec.validate();
  const std::size_t C = spec.num_classes, d = spec.dim;
  std::mt19937_64 rng(detail::mix_seed(spec.seed, 1));
  std::normal_distribution<double> normal;

  std::vector<double> dirs;
  switch (spec.geometry) {
    case SynthGeometry::simplex_etf:
      dirs = detail::simplex_etf(C, d, rng);
      break;
    case SynthGeometry::orthonormal:
      dirs = detail::random_frame(C, d, rng);
      break;
    case SynthGeometry::uniform_sphere:
    case SynthGeometry::random_gaussian:
      dirs.resize(C * d);
      for (std::size_t c = 0; c < C; ++c) {
        double n2 = 0.0;
        double* v = dirs.data() + c * d;
        do {
          n2 = 0.0;
          for (std::size_t k = 0; k < d; ++k) {
            v[k] = normal(rng);
            n2 += v[k] * v[k];
          }
        } while (n2 == 0.0);
        const double s = spec.geometry == SynthGeometry::uniform_sphere ? 1.0 / std::sqrt(n2)
                                                                        : 1.0 / std::sqrt(static_cast<double>(d));
        for (std::size_t k = 0; k < d; ++k) v[k] *= s;
      }
      break;
  }

  SynthInstance inst;
  inst.spec = spec;
  std::vector<double> offset(d, 0.0);
  if (spec.offset_scale > 0.0) {
    for (auto& v : offset) v = spec.offset_scale * normal(rng);
  }
  inst.means.resize(C * d);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t k = 0; k < d; ++k) inst.means[c * d + k] = offset[k] + spec.scale * dirs[c * d + k];

  inst.global_mean.assign(d, 0.0);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t k = 0; k < d; ++k) inst.global_mean[k] += inst.means[c * d + k];
  for (auto& v : inst.global_mean) v /= static_cast<double>(C);

  // Classifier rows.
  auto& cls = inst.classifiers;
  cls.num_classes = spec.num_classes;
  cls.dim = spec.dim;
  cls.weights.resize(C * d);
  std::vector<double> w(d);
  std::vector<float> biases;
  for (std::size_t c = 0; c < C; ++c) {
    if (spec.classifier_mode == ClassifierMode::random) {
      for (std::size_t k = 0; k < d; ++k) w[k] = normal(rng) / std::sqrt(static_cast<double>(d));
    } else {
      double n2 = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        w[k] = inst.means[c * d + k] - inst.global_mean[k];
        n2 += w[k] * w[k];
      }
      if (spec.classifier_mode == ClassifierMode::perturbed) {
        const double s = spec.perturb_eps * std::sqrt(n2 / static_cast<double>(d));
        for (std::size_t k = 0; k < d; ++k) w[k] += s * normal(rng);
      }
    }
    double wmu = 0.0, wn2 = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      cls.weights[c * d + k] = static_cast<float>(w[k]);
      wmu += w[k] * inst.global_mean[k];
      wn2 += w[k] * w[k];
    }
    // argmin ||h - mu_c||^2 = argmax <h, w_c> - <mu_bar, w_c> - ||w_c||^2/2 when w_c = mu_c - mu_bar.
    biases.push_back(static_cast<float>(-wmu - 0.5 * wn2));
  }
  if (spec.classifier_bias) cls.biases = std::move(biases);

  // Ground truth at the population level.
  nlohmann::json expected = nlohmann::json::object();
  const bool equinorm = spec.geometry != SynthGeometry::random_gaussian;
  if (spec.geometry == SynthGeometry::simplex_etf) {
    expected["interference"] = -1.0 / (static_cast<double>(C) - 1.0);
  }
  if (equinorm && spec.offset_scale == 0.0 && spec.geometry != SynthGeometry::uniform_sphere) {
    expected["log_norm_cov"] = 0.0;
  }
  {
    double sum = 0.0;
    std::uint64_t pairs = 0;
    for (std::size_t a = 0; a < C; ++a) {
      for (std::size_t b = a + 1; b < C; ++b) {
        double d2 = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
          const double diff = inst.means[a * d + k] - inst.means[b * d + k];
          d2 += diff * diff;
        }
        sum += spec.noise_sigma * spec.noise_sigma * static_cast<double>(d) / d2;
        ++pairs;
      }
    }
    expected["cdnv"] = sum / static_cast<double>(pairs);
  }
  if (spec.classifier_mode == ClassifierMode::tied_to_means) {
    expected["self_duality"] = 1.0;
    expected["self_duality_cov"] = 0.0;
    if (spec.noise_sigma == 0.0 &&
        (spec.classifier_bias || (equinorm && spec.offset_scale == 0.0))) {
      expected["nc4_agreement"] = 1.0;
    }
  }
  std::uint64_t lo = UINT64_MAX, hi = 0, total = 0;
  for (auto n : spec.samples_per_class) {
    lo = std::min(lo, n);
    hi = std::max(hi, n);
    total += n;
  }
  inst.truth = {
      {"num_classes", spec.num_classes},
      {"dim", spec.dim},
      {"geometry", to_string(spec.geometry)},
      {"classifier_mode", to_string(spec.classifier_mode)},
      {"noise_sigma", spec.noise_sigma},
      {"seed", spec.seed},
      {"sample_stream", spec.sample_stream},
      {"samples", {{"total", total}, {"min_per_class", lo}, {"max_per_class", hi}}},
      {"expected", expected},
  };
  return inst;
}

/// Calls fn(label, span<const double>) for every sample, class by class:
/// mu_c + noise_sigma * N(0, I_d), drawn from the instance's sample stream.
template <typename Fn>
void for_each_sample(const SynthInstance& inst, Fn&& fn) {
  const auto& spec = inst.spec;
  std::mt19937_64 rng(detail::mix_seed(spec.seed, 1000 + spec.sample_stream));
  std::normal_distribution<double> normal;
  std::vector<double> h(spec.dim);
  for (std::uint32_t c = 0; c < spec.num_classes; ++c) {
    auto mu = inst.mean(c);
    for (std::uint64_t i = 0; i < spec.samples_per_class[c]; ++i) {
      for (std::size_t k = 0; k < spec.dim; ++k) {
        h[k] = mu[k] + (spec.noise_sigma > 0.0 ? spec.noise_sigma * normal(rng) : 0.0);
      }
      fn(c, std::span<const double>(h));
    }
  }
}

inline void write_samples(std::ostream& out, const SynthInstance& inst) {
  std::uint64_t total = 0;
  for (auto n : inst.spec.samples_per_class) total += n;
  EmbeddingStreamWriter writer(out, inst.spec.dim, total);
  for_each_sample(inst, [&](std::uint32_t label, std::span<const double> h) { writer.write(label, h); });
}

/// Statistics accumulated from the double-precision samples, before the
/// float32 quantisation of the on-disk stream.
inline StatsCheckpoint accumulate_exact(const SynthInstance& inst) {
  StatsCheckpoint stats(inst.spec.num_classes, inst.spec.dim);
  for_each_sample(inst, [&](std::uint32_t label, std::span<const double> h) { update(stats.classes[label], h); });
  return stats;
}

/// The samples as float32 records, as they would be read back from disk.
inline std::vector<EmbeddingRecord> sample_records(const SynthInstance& inst) {
  std::vector<EmbeddingRecord> out;
  for_each_sample(inst, [&](std::uint32_t label, std::span<const double> h) {
    EmbeddingRecord r;
    r.label = label;
    r.vector.assign(h.begin(), h.end());
    out.push_back(std::move(r));
  });
  return out;
}

}  // namespace ncm
