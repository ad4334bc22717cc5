#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "oracles.hpp"
#include "querydet/errors.hpp"
#include "querydet/targets.hpp"

using namespace qd;

TEST(LevelScale, Formula) {
  EXPECT_EQ(level_scale(3, 4.0), 32.0);
  EXPECT_EQ(level_scale(2, 4.0), 16.0);
  for (int l = 2; l <= 7; ++l) EXPECT_EQ(query_threshold_grid(l, 4.0), 4.0);
  EXPECT_TRUE(is_small_for_level({0, 0, 15, 10, 0}, 2, 4.0));
  EXPECT_FALSE(is_small_for_level({0, 0, 10, 16, 0}, 2, 4.0));  // max side decides
}

TEST(DistanceMap, NoSmallObjectsIsInfinite) {
  DistanceMap d = distance_map({{{50, 50, 200, 200, 0}}}, 3, 8, 8, 4.0);
  for (double v : d.values) EXPECT_TRUE(std::isinf(v));
  for (float v : query_target(d, 4.0).values) EXPECT_EQ(v, 0.0f);
}

TEST(DistanceMap, ThreeFourFive) {
  // Center (36, 36) px on P_3 projects to grid (4, 4).
  DistanceMap d = distance_map({{{36, 36, 8, 8, 0}}}, 3, 16, 16, 4.0);
  EXPECT_EQ(d.at(4, 4), 0.0);
  EXPECT_EQ(d.at(7, 8), 5.0);
  DenseTensor v = query_target(d, 4.0);
  EXPECT_EQ(v.at(0, 4, 4), 1.0f);
  EXPECT_EQ(v.at(0, 8, 7), 0.0f);  // distance 5 >= 4
}

TEST(DistanceMap, TwoCentersIsPointwiseMin) {
  GroundTruthBox a{20, 20, 6, 6, 0}, b{100, 60, 6, 6, 1};
  DistanceMap da = distance_map({{a}}, 2, 20, 30, 4.0), db = distance_map({{b}}, 2, 20, 30, 4.0);
  DistanceMap both = distance_map({{a, b}}, 2, 20, 30, 4.0);
  for (std::size_t i = 0; i < both.values.size(); ++i) EXPECT_EQ(both.values[i], std::min(da.values[i], db.values[i]));
}

TEST(QueryTarget, MatchesBruteForce) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const int l = 2 + trial % 6;
    const int image = 64 + static_cast<int>(rng() % 400);
    const int h = image >> l, w = image >> l;
    std::uniform_real_distribution<double> pos(0, image - 1e-3), size(1, 80);
    GroundTruthSet gt;
    std::vector<std::array<double, 4>> raw;
    for (int i = 0, n = static_cast<int>(rng() % 6); i < n; ++i) {
      GroundTruthBox o{pos(rng), pos(rng), size(rng), size(rng), 0};
      gt.objects.push_back(o);
      raw.push_back({o.cx, o.cy, o.w, o.h});
    }
    DenseTensor v = query_target_for_level(gt, l, h, w, 4.0);
    std::vector<int> expect = oracle::query_target_brute(raw, l, h, w, 4.0);
    for (std::size_t i = 0; i < expect.size(); ++i) ASSERT_EQ(static_cast<int>(v.values[i]), expect[i]) << trial;
  }
}

TEST(QueryTarget, OrderInvariantAndMonotone) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> pos(0, 255), size(2, 40);
  GroundTruthSet gt;
  for (int i = 0; i < 8; ++i) gt.objects.push_back({pos(rng), pos(rng), size(rng), size(rng), i % 3});
  const DenseTensor base = query_target_for_level(gt, 3, 32, 32, 4.0);
  GroundTruthSet shuffled = gt;
  std::shuffle(shuffled.objects.begin(), shuffled.objects.end(), rng);
  EXPECT_EQ(query_target_for_level(shuffled, 3, 32, 32, 4.0), base);

  GroundTruthSet more = gt;
  more.objects.push_back({128, 128, 5, 5, 0});
  const DenseTensor grown = query_target_for_level(more, 3, 32, 32, 4.0);
  for (std::size_t i = 0; i < base.size(); ++i) EXPECT_GE(grown.values[i], base.values[i]);
}

TEST(QueryTarget, NonPositiveThreshold) { EXPECT_THROW(query_target(DistanceMap{1, 1, {0.0}}, 0.0), ConfigError); }

TEST(FocalLoss, GammaZeroIsHalfBce) {
  DenseTensor z = oracle::random_tensor(1, 1, 4, 4, -3, 3);
  DenseTensor t(1, 4, 4);
  for (std::size_t i = 0; i < t.size(); i += 3) t.values[i] = 1.0f;
  double bce = 0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double p = 1.0 / (1.0 + std::exp(-static_cast<double>(z.values[i])));
    bce += t.values[i] > 0.5f ? -std::log(p) : -std::log(1 - p);
  }
  bce /= static_cast<double>(z.size());
  EXPECT_NEAR(focal_loss(z, t, 0.5, 0.0), 0.5 * bce, 1e-12);
}

TEST(FocalLoss, SinglePositiveAtHalf) {
  // alpha * (1 - 0.5)^2 * ln 2 = 0.25 * 0.25 * ln 2.
  EXPECT_NEAR(focal_loss(DenseTensor(1, 1, 1, 0.0f), DenseTensor(1, 1, 1, 1.0f), 0.25, 2.0),
              0.25 * 0.25 * std::log(2.0), 1e-15);
  EXPECT_NEAR(0.25 * 0.25 * std::log(2.0), 0.043322, 1e-6);
}

TEST(FocalLoss, ConfidentPredictionsApproachZero) {
  double prev = 1e9;
  for (float z : {1.0f, 4.0f, 10.0f, 30.0f, 80.0f, 200.0f}) {
    const double pos = focal_loss(DenseTensor(1, 1, 1, z), DenseTensor(1, 1, 1, 1.0f), 0.25, 2.0);
    const double neg = focal_loss(DenseTensor(1, 1, 1, -z), DenseTensor(1, 1, 1, 0.0f), 0.25, 2.0);
    EXPECT_TRUE(std::isfinite(pos));
    EXPECT_LT(pos, prev);
    EXPECT_NEAR(pos, neg / 3.0, 1e-12 + 1e-9 * pos);  // alpha_t 0.25 vs 0.75
    prev = pos;
  }
  EXPECT_LT(prev, 1e-50);
  // Badly wrong but huge logits must stay finite.
  EXPECT_TRUE(std::isfinite(focal_loss(DenseTensor(1, 1, 1, -500.0f), DenseTensor(1, 1, 1, 1.0f), 0.25, 2.0)));
}

TEST(FocalLoss, MatchesLongDoubleOracle) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    DenseTensor z = oracle::random_tensor(seed, 1, 8, 8, -8, 8);
    DenseTensor t = oracle::random_tensor(seed + 50, 1, 8, 8, 0, 1);
    for (float& v : t.values) v = v > 0.7f ? 1.0f : 0.0f;
    EXPECT_NEAR(focal_loss(z, t, 0.25, 2.0), oracle::focal_oracle(z.values, t.values, 0.25, 2.0), 1e-9);
  }
  EXPECT_THROW(focal_loss(DenseTensor(1, 2, 2), DenseTensor(1, 2, 3), 0.25, 2.0), ValidationError);
}

TEST(SmoothL1, KnownValues) {
  auto one = [](float d) { return smooth_l1(DenseTensor(1, 1, 1, d), DenseTensor(1, 1, 1, 0.0f)); };
  EXPECT_EQ(one(0.0f), 0.0);
  EXPECT_EQ(one(0.5f), 0.125);
  EXPECT_EQ(one(2.0f), 1.5);
  EXPECT_EQ(one(-2.0f), 1.5);
  EXPECT_THROW(smooth_l1(DenseTensor(4, 1, 1), DenseTensor(1, 1, 4)), ValidationError);
}

TEST(SmoothL1, MatchesLongDoubleOracle) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    DenseTensor a = oracle::random_tensor(seed, 4, 5, 5, -3, 3), b = oracle::random_tensor(seed + 9, 4, 5, 5, -3, 3);
    EXPECT_NEAR(smooth_l1(a, b), oracle::smooth_l1_oracle(a.values, b.values), 1e-9);
  }
}

TEST(Beta, PublishedSchedules) {
  const auto coco = linear_beta_schedule(2, 7, 1.0, 3.0);
  const auto visdrone = linear_beta_schedule(2, 7, 1.0, 2.6);
  const std::vector<double> coco_expect{1.0, 1.4, 1.8, 2.2, 2.6, 3.0};
  const std::vector<double> vis_expect{1.0, 1.32, 1.64, 1.96, 2.28, 2.6};
  for (int l = 2; l <= 7; ++l) {
    EXPECT_EQ(coco.at(l), coco_expect[l - 2]);
    EXPECT_EQ(visdrone.at(l), vis_expect[l - 2]);
  }
}

TEST(TotalLoss, WeightsAndErrors) {
  std::map<int, double> losses{{2, 0.5}, {3, 0.25}, {4, 2.0}};
  EXPECT_EQ(total_loss(losses, {{2, 1.0}, {3, 1.0}, {4, 1.0}}), 2.75);
  // Doubling one beta adds exactly that level's loss.
  EXPECT_EQ(total_loss(losses, {{2, 1.0}, {3, 2.0}, {4, 1.0}}), 3.0);
  EXPECT_THROW(total_loss(losses, {{2, 1.0}, {3, 1.0}}), ConfigError);
}

TEST(LevelLoss, SumsThreeTerms) {
  LevelMaps m;
  m.cls_logits = oracle::random_tensor(1, 4, 3, 3, -2, 2);
  m.cls_target = DenseTensor(4, 3, 3);
  m.cls_target.values[5] = 1.0f;
  m.reg_deltas = oracle::random_tensor(2, 4, 3, 3);
  m.reg_target = oracle::random_tensor(3, 4, 3, 3);
  m.query_logits = oracle::random_tensor(4, 1, 3, 3, -2, 2);
  m.query_target = DenseTensor(1, 3, 3);
  m.query_target.values[4] = 1.0f;
  LossConfig cfg;
  EXPECT_DOUBLE_EQ(level_loss(m, cfg), focal_loss(m.cls_logits, m.cls_target, 0.25, 2.0) +
                                           smooth_l1(m.reg_deltas, m.reg_target) +
                                           focal_loss(m.query_logits, m.query_target, 0.25, 2.0));
  cfg.alpha = 1.5;
  EXPECT_THROW(level_loss(m, cfg), ConfigError);
}
