#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ncmeter/error.hpp"
#include "ncmeter/parallel.hpp"
#include "ncmeter/types.hpp"

namespace ncm {

struct AgreementResult {
  std::uint64_t samples_evaluated = 0;
  std::uint64_t agreements = 0;
  std::uint64_t linear_ties = 0;   // samples whose MAP decision was a near-tie
  std::uint64_t ncc_ties = 0;      // samples whose nearest-center decision was a near-tie
  std::uint64_t tied_samples = 0;  // near-tie on either side
  std::uint64_t linear_correct = 0;  // MAP decision equals the label (accuracy numerator)
  std::uint64_t excluded_classes = 0;  // classes with no training samples

  double rate() const {
    return samples_evaluated == 0 ? 0.0
                                  : static_cast<double>(agreements) / static_cast<double>(samples_evaluated);
  }

  void add(const AgreementResult& o) {
    samples_evaluated += o.samples_evaluated;
    agreements += o.agreements;
    linear_ties += o.linear_ties;
    ncc_ties += o.ncc_ties;
    tied_samples += o.tied_samples;
    linear_correct += o.linear_correct;
  }
};

struct AgreementOptions {
  std::size_t batch = 64;
  unsigned workers = 1;
  double tie = 1e-6;
};

/// Outcome of one argmax/argmin over the candidate classes.
struct Decision {
  std::uint32_t class_id = 0;
  bool near_tie = false;
};

/// Picks the best score (largest when `maximize`, else smallest). Scores
/// within tie * max(1, |best|) of the best count as a near-tie, and the
/// decision goes to the lowest class id among them. `ids` must be ascending.
inline Decision decide(std::span<const double> scores, std::span<const std::uint32_t> ids, bool maximize,
                       double tie) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < scores.size(); ++j) {
    if (maximize ? scores[j] > scores[best] : scores[j] < scores[best]) best = j;
  }
  const double tol = tie * std::max(1.0, std::abs(scores[best]));
  std::size_t first = scores.size();
  std::size_t within = 0;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    const double gap = maximize ? scores[best] - scores[j] : scores[j] - scores[best];
    if (gap <= tol) {
      if (first == scores.size()) first = j;
      ++within;
    }
  }
  return Decision{ids[first], within > 1};
}

/// Compares the linear MAP classifier, argmax <w_c, h> + b_c, with the
/// nearest-class-center classifier on held-out embeddings. Nearest center
/// uses ||h - mu_c||^2 = ||h||^2 + ||mu_c||^2 - 2<h, mu_c> with the
/// class-constant ||h||^2 dropped, so both rules become a dense product of
/// a sample batch with a transposed class matrix.
class AgreementEvaluator {
 public:
  AgreementEvaluator(const StatsCheckpoint& stats, const ClassifierSet& classifiers, AgreementOptions opt = {})
      : opt_(opt), dim_(stats.dim) {
    if (classifiers.num_classes != stats.num_classes()) {
      fail(ErrorKind::data, "classifier has " + std::to_string(classifiers.num_classes) +
                                " rows but statistics cover " + std::to_string(stats.num_classes()) +
                                " classes");
    }
    if (classifiers.dim != stats.dim) {
      fail(ErrorKind::data, "classifier dim " + std::to_string(classifiers.dim) +
                                " does not match statistics dim " + std::to_string(stats.dim));
    }
    for (std::uint32_t c = 0; c < stats.num_classes(); ++c) {
      if (stats.classes[c].count >= 1) candidates_.push_back(c);
    }
    if (candidates_.empty()) fail(ErrorKind::data, "no candidate classes: every class is empty");
    excluded_ = stats.num_classes() - candidates_.size();

    const std::size_t K = candidates_.size();
    weights_t_.assign(dim_ * K, 0.0);
    means_t_.assign(dim_ * K, 0.0);
    biases_.resize(K);
    mean_norm2_.assign(K, 0.0);
    for (std::size_t j = 0; j < K; ++j) {
      const auto c = candidates_[j];
      auto w = classifiers.row(c);
      const auto& mu = stats.classes[c].mean;
      for (std::size_t k = 0; k < dim_; ++k) {
        weights_t_[k * K + j] = w[k];
        means_t_[k * K + j] = mu[k];
        mean_norm2_[j] += mu[k] * mu[k];
      }
      biases_[j] = classifiers.bias(c);
    }
  }

  std::span<const std::uint32_t> candidates() const { return candidates_; }
  std::uint64_t excluded_classes() const { return excluded_; }

  struct SampleDecision {
    Decision linear;
    Decision ncc;
  };

  /// Both decisions for every record of one batch. Scores are computed a
  /// class tile at a time for the whole batch so each tile of the class
  /// matrices is reused across samples.
  std::vector<SampleDecision> decisions(std::span<const EmbeddingRecord> records) const {
    const std::size_t K = candidates_.size();
    const std::size_t B = records.size();
    std::vector<double> h(B * dim_);
    for (std::size_t b = 0; b < B; ++b) {
      const auto& v = records[b].vector;
      if (v.size() != dim_) {
        fail(ErrorKind::data, "embedding has " + std::to_string(v.size()) + " entries, statistics dim is " +
                                  std::to_string(dim_));
      }
      std::copy(v.begin(), v.end(), h.begin() + static_cast<std::ptrdiff_t>(b * dim_));
    }
    std::vector<double> linear(B * K), ncc(B * K);
    batch_scores(h, B, linear, ncc);
    std::vector<SampleDecision> out(B);
    for (std::size_t b = 0; b < B; ++b) {
      out[b].linear = decide(std::span<const double>(linear).subspan(b * K, K), candidates_, true, opt_.tie);
      out[b].ncc = decide(std::span<const double>(ncc).subspan(b * K, K), candidates_, false, opt_.tie);
    }
    return out;
  }

  AgreementResult evaluate(std::span<const EmbeddingRecord> records) const {
    AgreementResult out;
    const auto dec = decisions(records);
    for (std::size_t b = 0; b < dec.size(); ++b) {
      const auto& [lin, near] = dec[b];
      ++out.samples_evaluated;
      out.agreements += lin.class_id == near.class_id;
      out.linear_ties += lin.near_tie;
      out.ncc_ties += near.near_tie;
      out.tied_samples += lin.near_tie || near.near_tie;
      out.linear_correct += lin.class_id == records[b].label;
    }
    return out;
  }

  /// For B row-major samples h, fills B x K score matrices:
  /// linear = <w, h> + b and ncc = ||mu||^2 - 2<h, mu>.
  void batch_scores(std::span<const double> h, std::size_t B, std::span<double> linear,
                    std::span<double> ncc) const {
    constexpr std::size_t kClassTile = 512;
    const std::size_t K = candidates_.size();
    std::fill(linear.begin(), linear.end(), 0.0);
    std::fill(ncc.begin(), ncc.end(), 0.0);
    for (std::size_t j0 = 0; j0 < K; j0 += kClassTile) {
      const std::size_t j1 = std::min(K, j0 + kClassTile);
      for (std::size_t b = 0; b < B; ++b) {
        double* lin = linear.data() + b * K;
        double* near = ncc.data() + b * K;
        const double* hb = h.data() + b * dim_;
        for (std::size_t k = 0; k < dim_; ++k) {
          const double a = hb[k];
          const double* wt = weights_t_.data() + k * K;
          const double* mt = means_t_.data() + k * K;
          for (std::size_t j = j0; j < j1; ++j) {
            lin[j] += a * wt[j];
            near[j] += a * mt[j];
          }
        }
        for (std::size_t j = j0; j < j1; ++j) {
          lin[j] += biases_[j];
          near[j] = mean_norm2_[j] - 2.0 * near[j];
        }
      }
    }
  }

  /// Reads `source` (anything with bool next(EmbeddingRecord&)) to the end.
  template <typename Source>
  AgreementResult run(Source& source) const {
    AgreementResult total;
    total.excluded_classes = excluded_;
    const std::size_t batch = std::max<std::size_t>(1, opt_.batch);
    const std::size_t chunk = batch * std::max(1u, opt_.workers);
    std::vector<EmbeddingRecord> buffer(chunk);
    while (true) {
      std::size_t n = 0;
      while (n < chunk && source.next(buffer[n])) ++n;
      if (n == 0) break;
      const std::size_t nb = (n + batch - 1) / batch;
      std::vector<AgreementResult> parts(nb);
      parallel_for(nb, opt_.workers, [&](std::size_t b) {
        const std::size_t begin = b * batch;
        parts[b] = evaluate(std::span<const EmbeddingRecord>(buffer).subspan(begin, std::min(batch, n - begin)));
      });
      for (const auto& p : parts) total.add(p);
      if (n < chunk) break;
    }
    return total;
  }

 private:
  AgreementOptions opt_;
  std::size_t dim_;
  std::vector<std::uint32_t> candidates_;
  std::uint64_t excluded_ = 0;
  std::vector<double> weights_t_;  // dim x K
  std::vector<double> means_t_;    // dim x K
  std::vector<double> biases_;
  std::vector<double> mean_norm2_;
};

namespace detail {
struct SpanSource {
  std::span<const EmbeddingRecord> records;
  std::size_t pos = 0;
  bool next(EmbeddingRecord& r) {
    if (pos >= records.size()) return false;
    r = records[pos++];
    return true;
  }
};
}  // namespace detail

template <typename Source>
  requires requires(Source& s, EmbeddingRecord& r) { { s.next(r) } -> std::convertible_to<bool>; }
AgreementResult agreement_rate(Source& source, const StatsCheckpoint& stats, const ClassifierSet& classifiers,
                               AgreementOptions opt = {}) {
  return AgreementEvaluator(stats, classifiers, opt).run(source);
}

inline AgreementResult agreement_rate(std::span<const EmbeddingRecord> records, const StatsCheckpoint& stats,
                                      const ClassifierSet& classifiers, AgreementOptions opt = {}) {
  detail::SpanSource source{records};
  return AgreementEvaluator(stats, classifiers, opt).run(source);
}

}  // namespace ncm
