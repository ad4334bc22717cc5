#include "querydet/flops.hpp"

#include <cmath>
#include <limits>

#include "querydet/model.hpp"

namespace qd {

namespace {

constexpr std::uint64_t kTaps = 9;
constexpr std::uint64_t kTowerLayers = 3 * kTowerDepth;

HeadMacs per_tap_cost(std::uint64_t taps, std::uint64_t positions, const HeadShape& s) {
  const auto C = static_cast<std::uint64_t>(s.channels);
  const auto P = static_cast<std::uint64_t>(s.predictor_outputs());
  HeadMacs m;
  m.tower = kTowerLayers * taps * C * C;
  m.predictor = taps * C * P;
  m.bias_adds = positions * (kTowerLayers * C + P);
  return m;
}

// In-bounds 3x3 taps over a map: sum over dy of (H - |dy|), same for x.
std::uint64_t in_bounds_taps(int h, int w) {
  if (h <= 0 || w <= 0) return 0;
  auto side = [](int n) { return static_cast<std::uint64_t>(3 * n - 2); };
  return side(h) * side(w);
}

}  // namespace

HeadMacs head_flops_dense(int height, int width, const HeadShape& shape) {
  if (height <= 0 || width <= 0) return {};
  const auto positions = static_cast<std::uint64_t>(height) * width;
  return per_tap_cost(kTaps * positions, positions, shape);
}

HeadMacs head_flops_dense_in_bounds(int height, int width, const HeadShape& shape) {
  if (height <= 0 || width <= 0) return {};
  return per_tap_cost(in_bounds_taps(height, width), static_cast<std::uint64_t>(height) * width, shape);
}

HeadMacs head_flops_sparse(std::size_t num_keys, std::size_t rulebook_entries, const HeadShape& shape) {
  if (num_keys == 0) return {};
  return per_tap_cost(rulebook_entries, num_keys, shape);
}

double p2_cost_increase(int image_height, int image_width, const HeadShape& shape) {
  const double p2 = static_cast<double>(
      head_flops_dense(level_dim(image_height, 2), level_dim(image_width, 2), shape).total());
  double rest = 0;
  for (int l = 3; l <= 7; ++l)
    rest += static_cast<double>(head_flops_dense(level_dim(image_height, l), level_dim(image_width, l), shape).total());
  return p2 / rest;
}

double FlopsReport::sparse_over_dense() const {
  if (dense_total.total() == 0) return 0;
  return static_cast<double>(sparse_total.total()) / static_cast<double>(dense_total.total());
}

FlopsReport make_flops_report(int image_height, int image_width, int min_level, int max_level,
                              const HeadShape& shape,
                              const std::map<int, std::pair<std::size_t, std::size_t>>& sparse_levels) {
  FlopsReport r;
  for (int l = max_level; l >= min_level; --l) {
    LevelFlops lf;
    lf.level = l;
    lf.height = level_dim(image_height, l);
    lf.width = level_dim(image_width, l);
    lf.dense = head_flops_dense(lf.height, lf.width, shape);
    auto it = sparse_levels.find(l);
    lf.sparse = it == sparse_levels.end() ? lf.dense
                                          : head_flops_sparse(it->second.first, it->second.second, shape);
    r.dense_total += lf.dense;
    r.sparse_total += lf.sparse;
    r.levels.push_back(lf);
  }
  for (LevelFlops& lf : r.levels)
    lf.dense_share = r.dense_total.total() == 0
                         ? 0
                         : static_cast<double>(lf.dense.total()) / static_cast<double>(r.dense_total.total());
  r.p2_increase = (min_level <= 2 && max_level >= 7) ? p2_cost_increase(image_height, image_width, shape)
                                                     : std::numeric_limits<double>::quiet_NaN();
  return r;
}

}  // namespace qd
