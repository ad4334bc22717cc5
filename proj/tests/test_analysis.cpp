#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "querydet/bench.hpp"
#include "querydet/errors.hpp"
#include "querydet/flops.hpp"
#include "querydet/sparse.hpp"

using namespace qd;

TEST(Flops, OnePosition) {
  const HeadMacs m = head_flops_dense(1, 1, HeadShape{16, 1, 4});
  EXPECT_EQ(m.tower, 27648u);
  EXPECT_EQ(m.predictor, 1296u);
  EXPECT_EQ(m.total(), 28944u);
  EXPECT_EQ(m.bias_adds, 12u * 16 + 9);
}

TEST(Flops, LevelsScaleByFour) {
  const HeadShape s{32, 9, 80};
  for (int l = 3; l <= 7; ++l) {
    const auto fine = head_flops_dense(1024 >> (l - 1), 1024 >> (l - 1), s).total();
    const auto coarse = head_flops_dense(1024 >> l, 1024 >> l, s).total();
    EXPECT_EQ(fine, 4 * coarse);
  }
}

TEST(Flops, SparseFullCoverageEqualsInBoundsDense) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 10; ++i) {
    const int h = 1 + static_cast<int>(rng() % 40), w = 1 + static_cast<int>(rng() % 40);
    const HeadShape s{8 + static_cast<int>(rng() % 24), 1 + static_cast<int>(rng() % 3), 1 + static_cast<int>(rng() % 5)};
    const KeySet keys = KeySet::full(4, h, w);
    const Rulebook rb = build_rulebook(keys);
    EXPECT_EQ(head_flops_sparse(keys.size(), rb.entries.size(), s), head_flops_dense_in_bounds(h, w, s));
    // The padded count only agrees once border taps are ignored.
    EXPECT_GE(head_flops_dense(h, w, s).total(), head_flops_dense_in_bounds(h, w, s).total());
  }
}

TEST(Flops, IsolatedKeysPayOneTap) {
  const HeadShape s{16, 1, 4};
  const KeySet keys(3, 20, 20, {{1, 1}, {5, 5}, {10, 3}, {18, 18}});
  const Rulebook rb = build_rulebook(keys);
  EXPECT_EQ(rb.entries.size(), 4u);
  const HeadMacs sparse = head_flops_sparse(keys.size(), rb.entries.size(), s);
  const HeadMacs dense = head_flops_dense(2, 2, s);
  EXPECT_EQ(sparse.tower * 9, dense.tower);
  EXPECT_EQ(head_flops_sparse(0, 0, s), HeadMacs{});
}

TEST(Flops, P2Increase) {
  const HeadShape large{256, 9, 80};
  EXPECT_NEAR(p2_cost_increase(512, 512, large), 4.0 / (1 + 0.25 + 1.0 / 16 + 1.0 / 64 + 1.0 / 256), 1e-12);
  EXPECT_NEAR(p2_cost_increase(512, 512, large), 3.0029, 1e-4);
  const double odd = p2_cost_increase(500, 500, large);
  EXPECT_GE(odd, 2.9);
  EXPECT_LE(odd, 3.1);
}

TEST(Flops, ReportTotals) {
  const HeadShape s{16, 1, 4};
  const FlopsReport dense = make_flops_report(512, 512, 2, 7, s);
  EXPECT_EQ(dense.sparse_over_dense(), 1.0);
  ASSERT_EQ(dense.levels.size(), 6u);
  EXPECT_EQ(dense.levels.front().level, 7);
  double share = 0;
  for (const auto& lf : dense.levels) share += lf.dense_share;
  EXPECT_NEAR(share, 1.0, 1e-12);
  EXPECT_NEAR(dense.p2_increase, p2_cost_increase(512, 512, s), 1e-12);

  const FlopsReport sparse = make_flops_report(512, 512, 2, 7, s, {{2, {12, 60}}, {3, {12, 60}}});
  EXPECT_LT(sparse.sparse_over_dense(), 0.1);
  EXPECT_EQ(sparse.dense_total, dense.dense_total);
}

TEST(Bench, Median) {
  EXPECT_EQ(median({3, 1, 2}), 2.0);
  EXPECT_EQ(median({4, 1, 3, 2}), 2.5);
  EXPECT_EQ(median({}), 0.0);
}

TEST(Bench, SigmaSweep) {
  const auto s = sigma_sweep();
  ASSERT_EQ(s.size(), 19u);
  EXPECT_EQ(s.front(), 0.05);
  EXPECT_NEAR(s.back(), 0.95, 1e-12);
  for (std::size_t i = 1; i < s.size(); ++i) EXPECT_GT(s[i], s[i - 1]);
}

TEST(Bench, RejectsTooFewRepeats) {
  auto fx = fixtures::make_fixture(77, 8, 128, 2);
  EXPECT_THROW(run_benchmark(fx.pyramid, fx.weights, {QueryConfig{}}, 4), ConfigError);
  EXPECT_THROW(run_benchmark(fx.pyramid, fx.weights, {QueryConfig{}}, 5, 1), ConfigError);
}

TEST(Bench, RecordsPerLevelMedians) {
  auto fx = fixtures::make_fixture(77, 8, 128, 2);
  QueryConfig dense;
  dense.strategy = Strategy::kDense;
  const auto results = run_benchmark(fx.pyramid, fx.weights, {dense, QueryConfig{}}, 5, 2);
  ASSERT_EQ(results.size(), 2u);
  for (const auto& r : results) {
    EXPECT_EQ(r.samples.size(), 5u);
    EXPECT_EQ(r.level_millis.size(), 6u);
    EXPECT_GT(r.end_to_end_millis, 0.0);
  }
  EXPECT_LT(results[1].level_macs.at(2), results[0].level_macs.at(2));
}

TEST(Bench, MediansDisagree) {
  EXPECT_FALSE(medians_disagree(10, 11.9));
  EXPECT_TRUE(medians_disagree(10, 12.5));
  EXPECT_TRUE(medians_disagree(12.5, 10));
}

TEST(Bench, InterleavedMatchesSequentialCounts) {
  auto fx = fixtures::make_fixture(77, 8, 128, 2);
  QueryConfig a, b;
  b.sigma = 0.9;
  const auto seq = run_benchmark(fx.pyramid, fx.weights, {a, b}, 5, 2, BenchOrder::kSequential);
  const auto inter = run_benchmark(fx.pyramid, fx.weights, {a, b}, 5, 2, BenchOrder::kInterleaved);
  for (int i = 0; i < 2; ++i) {
    EXPECT_EQ(seq[i].level_keys, inter[i].level_keys);
    EXPECT_EQ(seq[i].level_macs, inter[i].level_macs);
    EXPECT_EQ(inter[i].samples.size(), 5u);
    EXPECT_EQ(inter[i].config.sigma, i == 0 ? a.sigma : b.sigma);
  }
}

TEST(Bench, PairedRatio) {
  BenchResult early, late;
  early.samples = {10, 20, 10, 40, 10};
  late.samples = {11, 22, 9, 44, 30};
  EXPECT_DOUBLE_EQ(paired_ratio(late, early), 1.1);
  late.samples.pop_back();
  EXPECT_THROW(paired_ratio(late, early), ValidationError);
}
