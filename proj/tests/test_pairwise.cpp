#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "ncmeter/accumulate.hpp"
#include "ncmeter/pairwise.hpp"
#include "ncmeter/synth.hpp"
#include "oracles.hpp"

using namespace ncm;

namespace {

// Checkpoint whose classes have the given means, counts and m2.
StatsCheckpoint make_stats(const std::vector<std::vector<double>>& means, std::uint64_t count = 3,
                           const std::vector<double>& m2 = {}) {
  StatsCheckpoint s(static_cast<std::uint32_t>(means.size()), static_cast<std::uint32_t>(means.front().size()));
  for (std::size_t c = 0; c < means.size(); ++c) {
    s.classes[c].count = count;
    s.classes[c].mean = means[c];
    s.classes[c].m2 = m2.empty() ? 0.0 : m2[c];
  }
  return s;
}

CenteredGeometry geometry_of(const StatsCheckpoint& s, std::uint64_t min_count = 1) {
  auto f = finalize(s, min_count);
  return build_geometry(s, f.global_mean.vector, min_count);
}

std::vector<std::vector<double>> random_means(std::mt19937_64& rng, std::size_t P, std::size_t d) {
  std::normal_distribution<double> normal;
  std::vector<std::vector<double>> out(P, std::vector<double>(d));
  for (auto& m : out)
    for (auto& x : m) x = normal(rng) * (1.0 + static_cast<double>(rng() % 5));
  return out;
}

}  // namespace

TEST(Geometry, CentersOnUnweightedMean) {
  auto s = make_stats({{2, 0}, {0, 2}});
  s.classes[0].count = 100;
  auto g = geometry_of(s);
  ASSERT_EQ(g.size(), 2u);
  EXPECT_DOUBLE_EQ(g.centered_row(0)[0], 1.0);
  EXPECT_DOUBLE_EQ(g.centered_row(0)[1], -1.0);
  EXPECT_DOUBLE_EQ(g.norms[1], std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(g.direction(1)[1], 1.0 / std::sqrt(2.0));
}

TEST(Geometry, ClassAtGlobalMeanIsDropped) {
  auto g = geometry_of(make_stats({{1, 0}, {-1, 0}, {0, 0}}));
  EXPECT_EQ(g.size(), 2u);
  EXPECT_EQ(g.dropped_zero_direction, (std::vector<std::uint32_t>{2}));
}

TEST(Geometry, FewerThanTwoClassesIsNumericError) {
  auto s = make_stats({{1, 0}, {1, 0}});
  try {
    geometry_of(s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::numeric);
  }
}

TEST(Cdnv, TwoClassExample) {
  // means (0,0) and (2,0), sigma^2 = 1 for both: (1 + 1)/(2 * 4) = 0.25
  auto s = make_stats({{0, 0}, {2, 0}}, 3, {2.0, 2.0});
  auto r = pairwise_summaries(geometry_of(s));
  EXPECT_EQ(r.cdnv.count, 1u);
  EXPECT_DOUBLE_EQ(r.cdnv.mean, 0.25);
  EXPECT_EQ(r.cdnv.variance(), 0.0);
  EXPECT_NEAR(r.cdnv_log10.mean, std::log10(0.25), 1e-15);
}

TEST(Cdnv, ScalingMeansByAQuadraticallyShrinks) {
  std::mt19937_64 rng(5);
  auto means = random_means(rng, 6, 4);
  std::vector<double> m2{1, 2, 3, 4, 5, 6};
  auto base = pairwise_summaries(geometry_of(make_stats(means, 5, m2)));
  for (auto& m : means)
    for (auto& x : m) x *= 10.0;
  auto scaled = pairwise_summaries(geometry_of(make_stats(means, 5, m2)));
  EXPECT_NEAR(scaled.cdnv.mean, base.cdnv.mean / 100.0, 1e-12 * base.cdnv.mean);
  EXPECT_NEAR(scaled.interference.mean, base.interference.mean, 1e-12);
}

TEST(Cdnv, SingletonClassesHaveNoVariance) {
  auto s = make_stats({{0, 0}, {2, 0}, {0, 3}}, 3, {2.0, 2.0, 0.0});
  s.classes[2].count = 1;
  auto r = pairwise_summaries(geometry_of(s));
  EXPECT_EQ(r.cdnv.count, 1u);
  EXPECT_EQ(r.interference.count, 3u);
  EXPECT_EQ(r.variance_classes, 2u);
}

TEST(Cdnv, ZeroVarianceIsCountedButNotLogged) {
  auto r = pairwise_summaries(geometry_of(make_stats({{0, 0}, {2, 0}})));
  EXPECT_EQ(r.cdnv.count, 1u);
  EXPECT_EQ(r.cdnv.mean, 0.0);
  EXPECT_EQ(r.cdnv_zero, 1u);
  EXPECT_EQ(r.cdnv_log10.count, 0u);
}

TEST(Norms, EquinormHasZeroCov) {
  auto g = geometry_of(make_stats({{2, 0}, {-2, 0}, {0, 2}, {0, -2}}));
  auto n = norm_summary(g);
  ASSERT_TRUE(n.log_norm_cov.has_value());
  EXPECT_NEAR(*n.log_norm_cov, 0.0, 1e-15);
}

TEST(Norms, LogNormsOneAndE) {
  // log norms {0, 1}: mean 0.5, population std 0.5, CoV 1
  CenteredGeometry g;
  g.dim = 1;
  std::vector<double> a{1.0}, b{-std::numbers::e};
  add_centered_class(g, 0, a, std::nullopt, 1e-12);
  add_centered_class(g, 1, b, std::nullopt, 1e-12);
  auto n = norm_summary(g);
  EXPECT_NEAR(n.log_norms.mean, 0.5, 1e-15);
  EXPECT_NEAR(*n.log_norm_cov, 1.0, 1e-15);
}

TEST(Norms, UnitNormsGiveNullCov) {
  auto g = geometry_of(make_stats({{1, 0}, {-1, 0}}));
  EXPECT_FALSE(norm_summary(g).log_norm_cov.has_value());
}

TEST(Interference, HundredTwentyDegrees) {
  const double r = std::sqrt(3.0) / 2.0;
  auto g = geometry_of(make_stats({{1, 0}, {-0.5, r}, {-0.5, -r}}));
  auto res = pairwise_summaries(g);
  EXPECT_NEAR(res.interference.mean, -0.5, 1e-15);
  EXPECT_NEAR(res.interference.std_dev(), 0.0, 1e-15);
  EXPECT_NEAR(res.etf_interference(), -0.5, 0.0);
}

TEST(Interference, OrthonormalDirections) {
  CenteredGeometry g;
  g.dim = 8;
  for (std::uint32_t i = 0; i < 4; ++i) {
    std::vector<double> m(8, 0.0);
    m[i] = 1.0 + i;
    add_centered_class(g, i, m, std::nullopt, 1e-12);
  }
  auto r = pairwise_summaries(g);
  EXPECT_NEAR(r.interference.mean, 0.0, 1e-15);
  EXPECT_NEAR(r.log_inv_dist.mean, -0.5 * std::log(2.0), 1e-15);
  EXPECT_EQ(interference_summary(g).log_inv_dist.count, 0u);
}

TEST(LogKernel, AntipodalAndOrthogonal) {
  auto anti = pairwise_summaries(geometry_of(make_stats({{1, 0}, {-1, 0}})));
  EXPECT_NEAR(anti.log_inv_dist.mean, -std::log(2.0), 1e-15);

  CenteredGeometry g;
  g.dim = 2;
  std::vector<double> a{1, 0}, b{0, 3};
  add_centered_class(g, 0, a, std::nullopt, 1e-12);
  add_centered_class(g, 1, b, std::nullopt, 1e-12);
  EXPECT_NEAR(logkernel_summary(g).log_inv_dist.mean, -0.5 * std::log(2.0), 1e-15);
}

TEST(LogKernel, CoincidentDirectionsAreDegenerate) {
  CenteredGeometry g;
  g.dim = 2;
  std::vector<double> a{1, 0}, b{4, 0}, c{0, 1};
  add_centered_class(g, 0, a, 1.0, 1e-12);
  add_centered_class(g, 1, b, 1.0, 1e-12);
  add_centered_class(g, 2, c, 1.0, 1e-12);
  auto r = pairwise_summaries(g);
  EXPECT_EQ(r.pairs, 3u);
  EXPECT_EQ(r.log_inv_dist_degenerate, 1u);
  EXPECT_EQ(r.log_inv_dist.count, 2u);
  EXPECT_EQ(r.cdnv.count, 3u);
}

TEST(Oracle, RandomInstancesMatchNaiveLoops) {
  std::mt19937_64 rng(2024);
  for (int inst = 0; inst < 100; ++inst) {
    const std::size_t P = 2 + rng() % 60, d = 1 + rng() % 12;
    auto means = random_means(rng, P, d);
    std::vector<double> m2(P);
    std::vector<std::optional<double>> var(P);
    for (std::size_t c = 0; c < P; ++c) {
      m2[c] = std::uniform_real_distribution<double>(0.0, 10.0)(rng);
      var[c] = m2[c] / 4.0;
    }
    auto g = geometry_of(make_stats(means, 5, m2));
    ASSERT_EQ(g.size(), P);
    PairwiseOptions opt;
    opt.tile = 1 + rng() % 17;
    auto r = pairwise_summaries(g, opt);
    auto ref = oracle::naive_pairwise(means, var);
    auto n = norm_summary(g);
    EXPECT_EQ(r.pairs, P * (P - 1) / 2);
    EXPECT_TRUE(oracle::close(r.cdnv.mean, ref.cdnv.mean, 1e-10)) << inst;
    EXPECT_TRUE(oracle::close(r.cdnv.variance(), ref.cdnv.variance, 1e-10)) << inst;
    EXPECT_TRUE(oracle::close(r.cdnv_log10.mean, ref.cdnv_log10.mean, 1e-10)) << inst;
    EXPECT_TRUE(oracle::close(r.interference.mean, ref.interference.mean, 1e-10)) << inst;
    EXPECT_TRUE(oracle::close(r.interference.variance(), ref.interference.variance, 1e-10)) << inst;
    EXPECT_TRUE(oracle::close(r.log_inv_dist.mean, ref.log_inv_dist.mean, 1e-10)) << inst;
    EXPECT_TRUE(oracle::close(r.log_inv_dist.variance(), ref.log_inv_dist.variance, 1e-10)) << inst;
    EXPECT_TRUE(oracle::close(n.log_norms.mean, ref.log_norm.mean, 1e-10)) << inst;
  }
}

TEST(Etf, SimplexInteferenceIsExact) {
  for (std::uint32_t C : {2u, 3u, 5u, 10u, 33u}) {
    SynthSpec spec;
    spec.num_classes = C;
    spec.dim = C + 1;
    spec.samples_per_class.assign(C, 1);
    spec.geometry = SynthGeometry::simplex_etf;
    spec.noise_sigma = 0.0;
    spec.seed = C;
    auto inst = generate(spec);
    auto stats = accumulate_exact(inst);
    auto g = geometry_of(stats);
    auto r = pairwise_summaries(g);
    EXPECT_NEAR(r.interference.mean, -1.0 / (C - 1.0), 1e-12) << C;
    EXPECT_LE(r.interference.variance(), 1e-24) << C;
  }
}

TEST(Invariance, RotationPreservesAllSummaries) {
  std::mt19937_64 rng(8);
  const std::size_t P = 20, d = 6;
  auto means = random_means(rng, P, d);
  std::vector<double> m2(P, 1.0);
  // random orthogonal matrix from Gram-Schmidt
  std::normal_distribution<double> normal;
  std::vector<std::vector<double>> Q(d, std::vector<double>(d));
  for (std::size_t i = 0; i < d; ++i) {
    for (auto& x : Q[i]) x = normal(rng);
    for (std::size_t j = 0; j < i; ++j) {
      double dot = 0.0;
      for (std::size_t k = 0; k < d; ++k) dot += Q[i][k] * Q[j][k];
      for (std::size_t k = 0; k < d; ++k) Q[i][k] -= dot * Q[j][k];
    }
    double n = 0.0;
    for (double x : Q[i]) n += x * x;
    for (auto& x : Q[i]) x /= std::sqrt(n);
  }
  auto rotated = means;
  for (std::size_t c = 0; c < P; ++c)
    for (std::size_t i = 0; i < d; ++i) {
      rotated[c][i] = 0.0;
      for (std::size_t k = 0; k < d; ++k) rotated[c][i] += Q[i][k] * means[c][k];
    }
  auto a = pairwise_summaries(geometry_of(make_stats(means, 4, m2)));
  auto b = pairwise_summaries(geometry_of(make_stats(rotated, 4, m2)));
  EXPECT_TRUE(oracle::close(a.cdnv.mean, b.cdnv.mean, 1e-9));
  EXPECT_TRUE(oracle::close(a.interference.mean, b.interference.mean, 1e-9));
  EXPECT_TRUE(oracle::close(a.interference.std_dev(), b.interference.std_dev(), 1e-9));
  EXPECT_TRUE(oracle::close(a.log_inv_dist.mean, b.log_inv_dist.mean, 1e-9));
}

TEST(Determinism, IdenticalAcrossRunsAndWorkers) {
  std::mt19937_64 rng(77);
  auto means = random_means(rng, 300, 7);
  std::vector<double> m2(300, 2.0);
  auto g = geometry_of(make_stats(means, 3, m2));
  PairwiseOptions opt;
  opt.tile = 64;
  opt.workers = 1;
  auto ref = pairwise_summaries(g, opt);
  for (unsigned w : {1u, 2u, 3u, 8u}) {
    opt.workers = w;
    auto r = pairwise_summaries(g, opt);
    EXPECT_EQ(std::bit_cast<std::uint64_t>(r.cdnv.mean), std::bit_cast<std::uint64_t>(ref.cdnv.mean)) << w;
    EXPECT_EQ(std::bit_cast<std::uint64_t>(r.cdnv.m2), std::bit_cast<std::uint64_t>(ref.cdnv.m2)) << w;
    EXPECT_EQ(std::bit_cast<std::uint64_t>(r.interference.mean),
              std::bit_cast<std::uint64_t>(ref.interference.mean)) << w;
    EXPECT_EQ(std::bit_cast<std::uint64_t>(r.log_inv_dist.m2), std::bit_cast<std::uint64_t>(ref.log_inv_dist.m2))
        << w;
  }
}
