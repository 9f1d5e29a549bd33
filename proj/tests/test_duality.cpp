#include <gtest/gtest.h>

#include <random>

#include "ncmeter/accumulate.hpp"
#include "ncmeter/duality.hpp"
#include "oracles.hpp"

using namespace ncm;

namespace {

StatsCheckpoint stats_of(const std::vector<std::vector<double>>& means) {
  StatsCheckpoint s(static_cast<std::uint32_t>(means.size()), static_cast<std::uint32_t>(means[0].size()));
  for (std::size_t c = 0; c < means.size(); ++c) {
    s.classes[c].count = 2;
    s.classes[c].mean = means[c];
  }
  return s;
}

CenteredGeometry geometry_of(const StatsCheckpoint& s) {
  auto f = finalize(s, 1);
  return build_geometry(s, f.global_mean.vector, 1);
}

ClassifierSet weights_of(const std::vector<std::vector<double>>& rows) {
  ClassifierSet w;
  w.num_classes = static_cast<std::uint32_t>(rows.size());
  w.dim = static_cast<std::uint32_t>(rows[0].size());
  for (const auto& r : rows)
    for (double x : r) w.weights.push_back(static_cast<float>(x));
  return w;
}

}  // namespace

TEST(Duality, TiedWeightsAreSelfDual) {
  auto s = stats_of({{1, 0}, {-1, 0}, {0, 3}, {0, -3}});
  auto g = geometry_of(s);
  auto p = duality_profile(g, weights_of({{2, 0}, {-5, 0}, {0, 1}, {0, -1}}), 4);
  ASSERT_EQ(p.similarity.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(p.similarity[i], 1.0, 1e-15);
    EXPECT_NEAR(p.distance[i], 0.0, 1e-15);
  }
  EXPECT_NEAR(*p.similarity_cov, 0.0, 1e-15);
}

TEST(Duality, PerpendicularWeights) {
  auto g = geometry_of(stats_of({{1, 0}, {-1, 0}}));
  auto p = duality_profile(g, weights_of({{0, 1}, {0, 1}}), 2);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_NEAR(p.similarity[i], 0.0, 1e-15);
    EXPECT_NEAR(p.distance[i], std::sqrt(2.0), 1e-15);
  }
  EXPECT_FALSE(p.similarity_cov.has_value());
}

TEST(Duality, DistanceSimilarityIdentity) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> normal;
  for (int t = 0; t < 50; ++t) {
    const std::size_t C = 3 + rng() % 20, d = 2 + rng() % 10;
    std::vector<std::vector<double>> means(C, std::vector<double>(d)), rows(C, std::vector<double>(d));
    for (auto& m : means)
      for (auto& x : m) x = normal(rng);
    for (auto& r : rows)
      for (auto& x : r) x = normal(rng);
    auto p = duality_profile(geometry_of(stats_of(means)), weights_of(rows), static_cast<std::uint32_t>(C));
    for (std::size_t i = 0; i < p.similarity.size(); ++i) {
      EXPECT_NEAR(p.distance[i] * p.distance[i], 2.0 - 2.0 * p.similarity[i], 1e-9);
      EXPECT_GE(p.similarity[i], -1.0);
      EXPECT_LE(p.similarity[i], 1.0);
    }
  }
}

TEST(Duality, InvariantToPositiveRowScaling) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal;
  std::vector<std::vector<double>> means(6, std::vector<double>(5)), rows(6, std::vector<double>(5));
  for (auto& m : means)
    for (auto& x : m) x = normal(rng);
  for (auto& r : rows)
    for (auto& x : r) x = normal(rng);
  auto g = geometry_of(stats_of(means));
  auto a = duality_profile(g, weights_of(rows), 6);
  for (std::size_t c = 0; c < rows.size(); ++c)
    for (auto& x : rows[c]) x *= std::pow(2.0, static_cast<double>(c) - 2.0);
  auto b = duality_profile(g, weights_of(rows), 6);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(a.similarity[i], b.similarity[i], 1e-6);
}

TEST(Duality, ZeroRowIsDropped) {
  auto g = geometry_of(stats_of({{1, 0}, {-1, 0}, {0, 1}}));
  auto p = duality_profile(g, weights_of({{1, 0}, {0, 0}, {0, 1}}), 3);
  EXPECT_EQ(p.dropped_zero_weight, (std::vector<std::uint32_t>{1}));
  EXPECT_EQ(p.similarity.size(), 2u);
}

TEST(Duality, ShapeMismatchIsDataError) {
  auto g = geometry_of(stats_of({{1, 0}, {-1, 0}}));
  try {
    duality_profile(g, weights_of({{1, 0, 0}, {0, 1, 0}}), 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::data);
  }
  try {
    duality_profile(g, weights_of({{1, 0}, {0, 1}, {1, 1}}), 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::data);
  }
}
