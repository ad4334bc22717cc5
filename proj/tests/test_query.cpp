#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "querydet/errors.hpp"
#include "querydet/query.hpp"

using namespace qd;

namespace {

DenseTensor logits_for(const std::vector<std::pair<GridPos, float>>& scores, int h, int w) {
  // Background far below any threshold used here.
  DenseTensor t(1, h, w, -30.0f);
  for (auto [p, s] : scores) t.at(0, p.y, p.x) = std::log(s / (1 - s));
  return t;
}

const fixtures::Fixture& small_fixture() {
  static const fixtures::Fixture f = fixtures::make_fixture(77, 8, 128, 2);
  return f;
}

}  // namespace

TEST(ExtractQueries, ThresholdIsStrict) {
  DenseTensor t = logits_for({{{1, 1}, 0.2f}, {{3, 0}, 0.1f}}, 4, 4);
  EXPECT_EQ(extract_queries(t, 4, 0.15).positions(), (std::vector<GridPos>{{1, 1}}));
  EXPECT_TRUE(extract_queries(t, 4, 1.0).empty());
  DenseTensor positive(1, 3, 2, 0.0f);
  EXPECT_EQ(extract_queries(positive, 4, 0.0).size(), 6u);
  EXPECT_TRUE(extract_queries(positive, 4, 0.5).empty());  // sigmoid(0) == 0.5 is not > 0.5
}

TEST(ExtractQueries, SparseReadsOnlyExistingKeys) {
  SparseFeature rows(KeySet(3, 8, 8, {{1, 1}, {5, 6}}), 1);
  rows.row(0)[0] = 3.0f;
  rows.row(1)[0] = -3.0f;
  KeySet q = extract_queries(rows, 0.15);
  EXPECT_EQ(q.positions(), (std::vector<GridPos>{{1, 1}}));
  EXPECT_EQ(q.level(), 3);
}

TEST(MapQueriesToKeys, FourNearestNeighbors) {
  KeySet k = map_queries_to_keys(KeySet(4, 8, 8, {{3, 5}}), 16, 16);
  EXPECT_EQ(k.positions(), (std::vector<GridPos>{{6, 10}, {7, 10}, {6, 11}, {7, 11}}));
  EXPECT_EQ(k.level(), 3);
  EXPECT_TRUE(map_queries_to_keys(KeySet(4, 8, 8, {}), 16, 16).empty());
}

TEST(MapQueriesToKeys, AdjacentQueriesDoNotCollide) {
  KeySet k = map_queries_to_keys(KeySet(4, 8, 8, {{0, 0}, {1, 0}}), 16, 16);
  EXPECT_EQ(k.positions(), (std::vector<GridPos>{{0, 0}, {1, 0}, {2, 0}, {3, 0}, {0, 1}, {1, 1}, {2, 1}, {3, 1}}));
}

TEST(MapQueriesToKeys, ClipsOddChildDims) {
  // 500 px: P_3 is 62 wide, P_2 is 125; the last column's child 2x+1 = 125 is out.
  KeySet k = map_queries_to_keys(KeySet(3, 62, 62, {{61, 61}}), 125, 125);
  EXPECT_EQ(k.positions(), (std::vector<GridPos>{{122, 122}, {123, 122}, {122, 123}, {123, 123}}));
  KeySet clipped = map_queries_to_keys(KeySet(3, 3, 3, {{2, 2}}), 5, 5);
  EXPECT_EQ(clipped.positions(), (std::vector<GridPos>{{4, 4}}));
}

TEST(QueryConfig, Validation) {
  EXPECT_THROW((QueryConfig{.sigma = 1.5}.validate()), ConfigError);
  EXPECT_THROW((QueryConfig{.start_level = 3, .min_level = 4}.validate()), ConfigError);
  EXPECT_THROW((QueryConfig{.cq_patch = 10}.validate()), ConfigError);
  EXPECT_NO_THROW(QueryConfig{}.validate());
  EXPECT_EQ(parse_strategy("ccq"), Strategy::kCcq);
  EXPECT_THROW(parse_strategy("fast"), ConfigError);
}

TEST(Cascade, SigmaOneEmptiesLowerLevels) {
  const auto& f = small_fixture();
  CascadeResult r = run_cascade(f.pyramid, f.weights, QueryConfig{.sigma = 1.0});
  for (int l : {3, 2}) {
    EXPECT_TRUE(r.level(l).computed_keys.empty());
    EXPECT_EQ(r.level(l).sparse_out.cls_logits.rows(), 0u);
    EXPECT_EQ(r.level(l).macs.total(), 0u);
  }
  EXPECT_TRUE(r.level(4).extracted_queries.empty());
}

TEST(Cascade, SigmaZeroMatchesDense) {
  const auto& f = small_fixture();
  CascadeResult csq = run_cascade(f.pyramid, f.weights, QueryConfig{.sigma = 0.0});
  CascadeResult dense = run_dense_pipeline(f.pyramid, f.weights, QueryConfig{});
  for (int l : {3, 2}) {
    const LevelResult& s = csq.level(l);
    EXPECT_EQ(s.computed_keys.size(), static_cast<std::size_t>(s.height) * s.width);
    const DenseHeadOutput& d = dense.level(l).dense_out;
    EXPECT_LE(oracle::rel_error(scatter(s.sparse_out.cls_logits, s.height, s.width), d.cls_logits), 1e-5);
    EXPECT_LE(oracle::rel_error(scatter(s.sparse_out.reg_deltas, s.height, s.width), d.reg_deltas), 1e-5);
    EXPECT_LE(oracle::rel_error(scatter(s.sparse_out.query_logits, s.height, s.width), d.query_logits), 1e-5);
  }
}

TEST(Cascade, PlantedBlobChildrenAreKeys) {
  const auto& f = small_fixture();
  CascadeResult r = run_cascade(f.pyramid, f.weights, QueryConfig{});
  const DenseTensor& q4 = r.level(4).dense_out.query_logits;
  for (const Blob& b : f.spec.blobs) {
    const GridPos parent{static_cast<int>(b.cx) >> 4, static_cast<int>(b.cy) >> 4};
    ASSERT_GT(sigmoid(q4.at(0, parent.y, parent.x)), 0.15f);
    for (int j = 0; j < 2; ++j)
      for (int i = 0; i < 2; ++i) EXPECT_TRUE(r.level(3).computed_keys.contains({2 * parent.x + i, 2 * parent.y + j}));
  }
}

TEST(Cascade, ContainmentAndParentage) {
  const auto& f = small_fixture();
  for (double sigma : {0.01, 0.05, 0.15, 0.5}) {
    CascadeResult r = run_cascade(f.pyramid, f.weights, QueryConfig{.sigma = sigma});
    for (int l = 3; l >= 2; --l) {
      const LevelResult& lv = r.level(l);
      EXPECT_TRUE(lv.extracted_queries.is_subset_of(lv.computed_keys));
      const KeySet& parent_queries = r.level(l + 1).extracted_queries;
      for (const GridPos& k : lv.computed_keys.positions())
        EXPECT_TRUE(parent_queries.contains({k.x / 2, k.y / 2}));
    }
  }
}

TEST(Cascade, RaisingSigmaNeverEnlargesKeys) {
  const auto& f = small_fixture();
  CascadeResult prev = run_cascade(f.pyramid, f.weights, QueryConfig{.sigma = 0.0});
  for (double sigma = 0.05; sigma <= 1.0; sigma += 0.05) {
    CascadeResult cur = run_cascade(f.pyramid, f.weights, QueryConfig{.sigma = sigma});
    for (int l : {3, 2}) {
      EXPECT_TRUE(cur.level(l).computed_keys.is_subset_of(prev.level(l).computed_keys));
      EXPECT_LE(cur.level(l).macs.total(), prev.level(l).macs.total());
    }
    prev = std::move(cur);
  }
}

TEST(Cascade, MissingLevelIsConfigError) {
  FeaturePyramid pyr = small_fixture().pyramid;
  pyr.levels.erase(3);
  EXPECT_THROW(run_cascade(pyr, small_fixture().weights, QueryConfig{}), ConfigError);
  EXPECT_THROW(run_cascade(small_fixture().pyramid, small_fixture().weights, QueryConfig{.start_level = 8}),
               ConfigError);
}

TEST(FullConvQuery, KeptOutputsBitwiseEqualDense) {
  const auto& f = small_fixture();
  CascadeResult ccq = run_full_conv_query(f.pyramid, f.weights, QueryConfig{.sigma = 0.05});
  CascadeResult dense = run_dense_pipeline(f.pyramid, f.weights, QueryConfig{});
  for (int l : {3, 2}) {
    const LevelResult& c = ccq.level(l);
    ASSERT_FALSE(c.computed_keys.empty());
    SparseHeadOutput expect = gather_head_output(dense.level(l).dense_out, c.computed_keys);
    EXPECT_EQ(c.sparse_out.cls_logits, expect.cls_logits);
    EXPECT_EQ(c.sparse_out.reg_deltas, expect.reg_deltas);
    EXPECT_EQ(c.sparse_out.query_logits, expect.query_logits);
  }
}

TEST(FullConvQuery, SigmaOneStillPaysDenseCost) {
  const auto& f = small_fixture();
  CascadeResult ccq = run_full_conv_query(f.pyramid, f.weights, QueryConfig{.sigma = 1.0});
  for (int l : {3, 2}) {
    const LevelResult& c = ccq.level(l);
    EXPECT_TRUE(c.computed_keys.empty());
    EXPECT_EQ(c.macs, head_flops_dense(c.height, c.width, ccq.shape));
    EXPECT_EQ(c.dense_positions, static_cast<std::size_t>(c.height) * c.width);
  }
}

TEST(FullConvQuery, FirstSparseLevelKeysMatchCascade) {
  const auto& f = small_fixture();
  CascadeResult ccq = run_full_conv_query(f.pyramid, f.weights, QueryConfig{});
  CascadeResult csq = run_cascade(f.pyramid, f.weights, QueryConfig{});
  EXPECT_EQ(ccq.level(4).extracted_queries, csq.level(4).extracted_queries);
  EXPECT_EQ(ccq.level(3).computed_keys, csq.level(3).computed_keys);
}

TEST(CropQuery, InteriorKeysMatchDense) {
  const auto& f = small_fixture();
  const DenseTensor& feature = f.pyramid.level(3);
  DenseHeadOutput full = run_dense_head(feature, f.weights);
  const int mid = 5;
  for (GridPos p : {GridPos{5, 5}, GridPos{8, 6}, GridPos{10, 10}}) {
    DenseHeadOutput patch = run_dense_head(crop_patch(feature, p.x, p.y, 11), f.weights);
    for (int c = 0; c < 4; ++c)
      EXPECT_NEAR(patch.cls_logits.at(c, mid, mid), full.cls_logits.at(c, p.y, p.x), 1e-5);
    EXPECT_NEAR(patch.query_logits.at(0, mid, mid), full.query_logits.at(0, p.y, p.x), 1e-5);
  }
}

TEST(CropQuery, BorderAndEmptyKeys) {
  const auto& f = small_fixture();
  EXPECT_NO_THROW(run_dense_head(crop_patch(f.pyramid.level(2), 0, 0, 11), f.weights));
  CascadeResult empty = run_crop_query(f.pyramid, f.weights, QueryConfig{.sigma = 1.0});
  EXPECT_EQ(empty.level(3).patches, 0u);
  EXPECT_EQ(empty.level(2).sparse_out.cls_logits.rows(), 0u);
}

TEST(CropQuery, PatchCountEqualsKeyCount) {
  const auto& f = small_fixture();
  CascadeResult cq = run_crop_query(f.pyramid, f.weights, QueryConfig{});
  for (int l : {3, 2}) EXPECT_EQ(cq.level(l).patches, cq.level(l).computed_keys.size());
  EXPECT_GT(cq.level(3).patches, 0u);
}

TEST(CropQuery, CenterOutputsMatchDenseAwayFromBorders) {
  const auto& f = small_fixture();
  CascadeResult cq = run_crop_query(f.pyramid, f.weights, QueryConfig{.sigma = 0.0});
  CascadeResult dense = run_dense_pipeline(f.pyramid, f.weights, QueryConfig{});
  const LevelResult& lv = cq.level(3);
  const DenseHeadOutput& d = dense.level(3).dense_out;
  std::size_t checked = 0;
  for (std::size_t i = 0; i < lv.computed_keys.size(); ++i) {
    const GridPos p = lv.computed_keys[i];
    if (p.x < 5 || p.y < 5 || p.x >= lv.width - 5 || p.y >= lv.height - 5) continue;
    ++checked;
    for (int c = 0; c < 4; ++c) EXPECT_NEAR(lv.sparse_out.cls_logits.row(i)[c], d.cls_logits.at(c, p.y, p.x), 1e-5);
  }
  EXPECT_GT(checked, 0u);
}
