#pragma once

#include <compare>
#include <cstdint>
#include <span>
#include <vector>

#include "querydet/tensor.hpp"

namespace qd {

struct GridPos {
  int x = 0;
  int y = 0;

  bool operator==(const GridPos&) const = default;
  // Canonical order: row-major (y, then x).
  std::strong_ordering operator<=>(const GridPos& o) const {
    if (auto c = y <=> o.y; c != 0) return c;
    return x <=> o.x;
  }
};

// Active positions on one pyramid level, deduplicated and sorted row-major.
class KeySet {
 public:
  KeySet() = default;
  // Sorts and deduplicates; throws ValidationError on an out-of-bounds position.
  KeySet(int level, int height, int width, std::vector<GridPos> positions);

  static KeySet full(int level, int height, int width);

  int level() const { return level_; }
  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return positions_.size(); }
  bool empty() const { return positions_.empty(); }
  const std::vector<GridPos>& positions() const { return positions_; }
  const GridPos& operator[](std::size_t i) const { return positions_[i]; }
  bool contains(GridPos p) const;
  // Both sets must live on the same grid.
  bool is_subset_of(const KeySet& other) const;
  std::uint64_t fingerprint() const;

  bool operator==(const KeySet&) const = default;

 private:
  int level_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<GridPos> positions_;
};

// Per-key feature rows ("value features"), stored in key order.
struct SparseFeature {
  KeySet keys;
  int channels = 0;
  std::vector<float> features;

  SparseFeature() = default;
  SparseFeature(KeySet k, int c);

  std::size_t rows() const { return keys.size(); }
  std::span<float> row(std::size_t i) { return {features.data() + i * channels, static_cast<std::size_t>(channels)}; }
  std::span<const float> row(std::size_t i) const {
    return {features.data() + i * channels, static_cast<std::size_t>(channels)};
  }
  bool operator==(const SparseFeature&) const = default;
};

// Kernel offset k in 0..8 encodes (dy, dx) = (k / 3 - 1, k % 3 - 1); 4 is the center.
constexpr int kCenterOffset = 4;
constexpr int offset_dy(int k) { return k / 3 - 1; }
constexpr int offset_dx(int k) { return k % 3 - 1; }

struct RuleEntry {
  int output = 0;
  int input = 0;
  int offset = 0;
  bool operator==(const RuleEntry&) const = default;
};

// Submanifold 3x3 neighbor map. Entries are grouped by output key (CSR via
// row_begin) and sorted by offset inside each group.
struct Rulebook {
  std::vector<RuleEntry> entries;
  std::vector<std::size_t> row_begin;
  std::size_t num_keys = 0;
  std::uint64_t key_fingerprint = 0;

  std::size_t size() const { return entries.size(); }
  std::span<const RuleEntry> for_output(std::size_t o) const {
    return {entries.data() + row_begin[o], row_begin[o + 1] - row_begin[o]};
  }
};

SparseFeature gather(const DenseTensor& dense, const KeySet& keys);
DenseTensor scatter(const SparseFeature& sparse, int height, int width);

Rulebook build_rulebook(const KeySet& keys);

// Output row o = bias + sum over rulebook entries of w[offset] * input row,
// accumulated offsets 0..8 outer, channels inner. Parallel over keys.
SparseFeature sparse_conv(const SparseFeature& input, const ConvWeights& w, const Rulebook& rb);

void relu_inplace(SparseFeature& f);

namespace reference {
SparseFeature sparse_conv(const SparseFeature& input, const ConvWeights& w, const Rulebook& rb);
}

namespace fault {
// Test hook for verification fault-injection: sparse_conv drops the bias term.
void set_skip_sparse_bias(bool on);
bool skip_sparse_bias();
}  // namespace fault

}  // namespace qd
