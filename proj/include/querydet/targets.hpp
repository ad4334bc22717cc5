#pragma once

#include <map>
#include <vector>

#include "querydet/tensor.hpp"

namespace qd {

struct GroundTruthBox {
  double cx = 0;  // image pixels
  double cy = 0;
  double w = 0;
  double h = 0;
  int cls = 0;
  bool operator==(const GroundTruthBox&) const = default;
};

struct GroundTruthSet {
  std::vector<GroundTruthBox> objects;

  // Throws ValidationError for non-positive sizes or centers outside the image.
  void validate(int image_height, int image_width) const;
};

struct LossConfig {
  double alpha = 0.25;
  double gamma = 2.0;
  double anchor_base = 4.0;
  std::map<int, double> beta;  // per-level loss weight

  void validate() const;
};

// Minimum anchor scale s_l = base * 2^l, in image pixels.
double level_scale(int level, double base);

// Objects with max(w, h) < s_l.
bool is_small_for_level(const GroundTruthBox& o, int level, double base);

// Grid-space form of s_l used by the query target; the stride cancels to base.
double query_threshold_grid(int level, double base);

// Row-major H x W map of doubles.
struct DistanceMap {
  int height = 0;
  int width = 0;
  std::vector<double> values;

  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

// Euclidean grid distance to the nearest small-object center, projected as
// (floor(cx / 2^l), floor(cy / 2^l)). +infinity without small objects.
DistanceMap distance_map(const GroundTruthSet& gt, int level, int height, int width, double base);

// Binary map: 1 where distance < threshold_grid. Returned as a 1-channel tensor.
DenseTensor query_target(const DistanceMap& d, double threshold_grid);

// Convenience: distance_map followed by query_target at the level's own threshold.
DenseTensor query_target_for_level(const GroundTruthSet& gt, int level, int height, int width, double base);

// Mean over elements of -alpha_t (1 - p_t)^gamma ln(p_t), p = sigmoid(logit).
double focal_loss(const DenseTensor& logits, const DenseTensor& target, double alpha, double gamma);

// Mean of 0.5 d^2 (|d| < 1) or |d| - 0.5, d = pred - target.
double smooth_l1(const DenseTensor& pred, const DenseTensor& target);

struct LevelMaps {
  DenseTensor cls_logits;
  DenseTensor reg_deltas;
  DenseTensor query_logits;
  DenseTensor cls_target;
  DenseTensor reg_target;
  DenseTensor query_target;
};

// FL(U, U*) + smoothL1(R, R*) + FL(V, V*).
double level_loss(const LevelMaps& maps, const LossConfig& cfg);

// sum_l beta_l * L_l; throws ConfigError if a level has no beta.
double total_loss(const std::map<int, double>& level_losses, const std::map<int, double>& beta);

// beta_l growing linearly from first to last across [min_level, max_level].
std::map<int, double> linear_beta_schedule(int min_level, int max_level, double first, double last);

}  // namespace qd
