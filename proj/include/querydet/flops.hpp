#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <vector>

namespace qd {

struct HeadShape {
  int channels = 16;
  int num_anchors = 1;
  int num_classes = 4;

  // Output channels of all three predictors together: A*K + A*4 + 1.
  std::int64_t predictor_outputs() const {
    return static_cast<std::int64_t>(num_anchors) * num_classes + num_anchors * 4 + 1;
  }
};

// Multiply-accumulate counts for the three 4-conv towers plus predictors.
// Bias additions are kept apart from the MACs.
struct HeadMacs {
  std::uint64_t tower = 0;
  std::uint64_t predictor = 0;
  std::uint64_t bias_adds = 0;

  std::uint64_t total() const { return tower + predictor; }
  HeadMacs& operator+=(const HeadMacs& o) {
    tower += o.tower;
    predictor += o.predictor;
    bias_adds += o.bias_adds;
    return *this;
  }
  bool operator==(const HeadMacs&) const = default;
};

// Cost of a dense zero-padded head: every position pays all 9 taps,
// H'W' * [3 * 4 * 9C^2 + 9C(A*K + A*4 + 1)].
HeadMacs head_flops_dense(int height, int width, const HeadShape& shape);

// Same head but only counting taps that land inside the map. This is what a
// full-coverage sparse run executes.
HeadMacs head_flops_dense_in_bounds(int height, int width, const HeadShape& shape);

// Sparse head: per tower layer entries * C^2, predictors entries * C * (A*K + A*4 + 1).
HeadMacs head_flops_sparse(std::size_t num_keys, std::size_t rulebook_entries, const HeadShape& shape);

// Dense head cost of P_2 over the summed cost of P_3..P_7.
double p2_cost_increase(int image_height, int image_width, const HeadShape& shape);

struct LevelFlops {
  int level = 0;
  int height = 0;
  int width = 0;
  HeadMacs dense;
  HeadMacs sparse;  // equals dense when the level ran densely
  double dense_share = 0;  // of total dense head cost across the pyramid
};

struct FlopsReport {
  std::vector<LevelFlops> levels;  // descending level order
  HeadMacs dense_total;
  HeadMacs sparse_total;
  double p2_increase = 0;  // NaN when the pyramid lacks P_2..P_7

  double sparse_over_dense() const;
};

// Analytic breakdown for a pyramid of the given image size. sparse_levels maps
// a level to (keys, rulebook entries) for levels that run sparsely.
FlopsReport make_flops_report(int image_height, int image_width, int min_level, int max_level,
                              const HeadShape& shape,
                              const std::map<int, std::pair<std::size_t, std::size_t>>& sparse_levels = {});

}  // namespace qd
