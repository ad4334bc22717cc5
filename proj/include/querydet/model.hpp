#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "querydet/sparse.hpp"
#include "querydet/tensor.hpp"

namespace qd {

constexpr int kMinPyramidLevel = 2;
constexpr int kMaxPyramidLevel = 7;
constexpr int kTowerDepth = 4;

// Spatial size of level l for an image side: floor(side / 2^l).
constexpr int level_dim(int image_side, int level) { return image_side >> level; }

struct FeaturePyramid {
  int image_height = 0;
  int image_width = 0;
  int channels = 0;
  std::map<int, DenseTensor> levels;

  int min_level() const { return levels.begin()->first; }
  int max_level() const { return levels.rbegin()->first; }
  bool has_level(int l) const { return levels.count(l) != 0; }
  const DenseTensor& level(int l) const;

  // Throws ConfigError if any level breaks the floor law or the shared C.
  void validate() const;
  bool operator==(const FeaturePyramid&) const = default;
};

enum class Branch { kCls = 0, kReg = 1, kQuery = 2 };

// One set of head parameters shared by every pyramid level.
struct HeadWeights {
  int channels = 0;
  int num_anchors = 1;
  int num_classes = 1;
  std::array<std::array<ConvWeights, kTowerDepth>, 3> towers;
  std::array<ConvWeights, 3> predictors;

  const std::array<ConvWeights, kTowerDepth>& tower(Branch b) const { return towers[static_cast<int>(b)]; }
  const ConvWeights& predictor(Branch b) const { return predictors[static_cast<int>(b)]; }
  int predictor_channels(Branch b) const;

  // Stable (role, conv) listing used by the weights container.
  std::vector<std::pair<std::string, const ConvWeights*>> roles() const;
  std::vector<std::pair<std::string, ConvWeights*>> roles();

  void validate() const;
  bool operator==(const HeadWeights&) const = default;
};

struct DenseHeadOutput {
  DenseTensor cls_logits;
  DenseTensor reg_deltas;
  DenseTensor query_logits;
};

// Sparse analogue; all three features carry the same KeySet.
struct SparseHeadOutput {
  SparseFeature cls_logits;
  SparseFeature reg_deltas;
  SparseFeature query_logits;

  const KeySet& keys() const { return query_logits.keys; }
};

DenseHeadOutput run_dense_head(const DenseTensor& feature, const HeadWeights& w);

// Builds one rulebook from the key set and reuses it for every layer.
SparseHeadOutput run_sparse_head(const SparseFeature& value_features, const HeadWeights& w);
// Same, with a rulebook the caller already built from value_features.keys.
SparseHeadOutput run_sparse_head(const SparseFeature& value_features, const HeadWeights& w, const Rulebook& rb);

// Reads a dense head output at the given keys.
SparseHeadOutput gather_head_output(const DenseHeadOutput& dense, const KeySet& keys);

struct Blob {
  double cx = 0;      // image pixels
  double cy = 0;
  double size = 12;   // side in image pixels
  int cls = 0;
  double strength = 12;  // approximate dense query-logit lift at the blob center
};

struct SyntheticPyramidSpec {
  std::uint64_t seed = 0;
  int image_height = 512;
  int image_width = 512;
  int min_level = 2;
  int max_level = 7;
  int channels = 16;
  std::vector<Blob> blobs;
  double noise = 0.25;  // background std, in the same logit-lift units as Blob::strength
};

// Feature amplitude that lifts a fixture-weight cls/query logit by about one
// unit when held over a flat patch (five chained convolutions).
double fixture_unit_amplitude(int channels);

FeaturePyramid make_synthetic_pyramid(const SyntheticPyramidSpec& spec);

// Seeded blobs at least `margin` pixels from the border, sides in [6, 14), classes in [0, 4).
std::vector<Blob> random_blobs(std::uint64_t seed, int count, int image_height, int image_width, double margin = 24);

// Seeded weights, every value scaled by 1/sqrt(fan_in). The cls and query
// branches use center-dominant kernels with positive center taps so planted
// blobs light them up; the regression branch is signed noise. cls and query
// predictor biases start at -ln((1 - pi) / pi), pi = 0.01.
HeadWeights make_fixture_weights(std::uint64_t seed, int channels, int num_anchors, int num_classes);

constexpr double kPriorProbability = 0.01;
double prior_bias(double pi = kPriorProbability);

}  // namespace qd
