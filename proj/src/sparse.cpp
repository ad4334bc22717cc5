#include "querydet/sparse.hpp"

#include <algorithm>
#include <atomic>
#include <string>

#include "querydet/errors.hpp"
#include "querydet/hash.hpp"

namespace qd {

namespace {

std::atomic<bool> g_skip_bias{false};

std::string pos_str(GridPos p) {
  return "(" + std::to_string(p.x) + "," + std::to_string(p.y) + ")";
}

void check_in_bounds(const KeySet& keys, int height, int width, const char* what) {
  for (const GridPos& p : keys.positions())
    if (p.x < 0 || p.y < 0 || p.x >= width || p.y >= height)
      throw ValidationError(std::string(what) + ": key " + pos_str(p) + " outside " +
                            std::to_string(height) + "x" + std::to_string(width));
}

}  // namespace

namespace fault {
void set_skip_sparse_bias(bool on) { g_skip_bias = on; }
bool skip_sparse_bias() { return g_skip_bias; }
}  // namespace fault

KeySet::KeySet(int level, int height, int width, std::vector<GridPos> positions)
    : level_(level), height_(height), width_(width), positions_(std::move(positions)) {
  if (height < 0 || width < 0) throw ConfigError("negative key set bounds");
  std::sort(positions_.begin(), positions_.end());
  positions_.erase(std::unique(positions_.begin(), positions_.end()), positions_.end());
  check_in_bounds(*this, height, width, "KeySet");
}

KeySet KeySet::full(int level, int height, int width) {
  std::vector<GridPos> all;
  all.reserve(static_cast<std::size_t>(height) * width);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) all.push_back({x, y});
  return KeySet(level, height, width, std::move(all));
}

bool KeySet::contains(GridPos p) const {
  return std::binary_search(positions_.begin(), positions_.end(), p);
}

bool KeySet::is_subset_of(const KeySet& other) const {
  return std::includes(other.positions_.begin(), other.positions_.end(), positions_.begin(),
                       positions_.end());
}

std::uint64_t KeySet::fingerprint() const {
  Fnv1a h;
  h.update_value(height_);
  h.update_value(width_);
  for (const GridPos& p : positions_) {
    h.update_value(p.x);
    h.update_value(p.y);
  }
  return h.digest();
}

SparseFeature::SparseFeature(KeySet k, int c)
    : keys(std::move(k)), channels(c), features(keys.size() * static_cast<std::size_t>(c), 0.0f) {}

SparseFeature gather(const DenseTensor& dense, const KeySet& keys) {
  check_in_bounds(keys, dense.height, dense.width, "gather");
  SparseFeature out(keys, dense.channels);
  const std::size_t plane = dense.plane();
  const int n = static_cast<int>(keys.size());
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    const GridPos p = keys[i];
    const std::size_t base = static_cast<std::size_t>(p.y) * dense.width + p.x;
    float* row = out.features.data() + static_cast<std::size_t>(i) * dense.channels;
    for (int c = 0; c < dense.channels; ++c) row[c] = dense.values[c * plane + base];
  }
  return out;
}

DenseTensor scatter(const SparseFeature& sparse, int height, int width) {
  check_in_bounds(sparse.keys, height, width, "scatter");
  DenseTensor out(sparse.channels, height, width);
  for (std::size_t i = 0; i < sparse.rows(); ++i) {
    const GridPos p = sparse.keys[i];
    auto row = sparse.row(i);
    for (int c = 0; c < sparse.channels; ++c) out.at(c, p.y, p.x) = row[c];
  }
  return out;
}

Rulebook build_rulebook(const KeySet& keys) {
  Rulebook rb;
  rb.num_keys = keys.size();
  rb.key_fingerprint = keys.fingerprint();
  rb.row_begin.assign(keys.size() + 1, 0);
  if (keys.empty()) return rb;

  const int H = keys.height(), W = keys.width();
  std::vector<int> index(static_cast<std::size_t>(H) * W, -1);
  for (std::size_t i = 0; i < keys.size(); ++i)
    index[static_cast<std::size_t>(keys[i].y) * W + keys[i].x] = static_cast<int>(i);

  auto neighbor = [&](GridPos p, int k) {
    const int nx = p.x + offset_dx(k), ny = p.y + offset_dy(k);
    if (nx < 0 || ny < 0 || nx >= W || ny >= H) return -1;
    return index[static_cast<std::size_t>(ny) * W + nx];
  };

  const int n = static_cast<int>(keys.size());
  std::vector<std::size_t> counts(keys.size(), 0);
#pragma omp parallel for schedule(static)
  for (int o = 0; o < n; ++o)
    for (int k = 0; k < 9; ++k)
      if (neighbor(keys[o], k) >= 0) ++counts[o];

  for (std::size_t o = 0; o < keys.size(); ++o) rb.row_begin[o + 1] = rb.row_begin[o] + counts[o];
  rb.entries.resize(rb.row_begin.back());

#pragma omp parallel for schedule(static)
  for (int o = 0; o < n; ++o) {
    std::size_t slot = rb.row_begin[o];
    for (int k = 0; k < 9; ++k) {
      const int in = neighbor(keys[o], k);
      if (in >= 0) rb.entries[slot++] = RuleEntry{o, in, k};
    }
  }
  return rb;
}

namespace {

void check_sparse_conv(const SparseFeature& input, const ConvWeights& w, const Rulebook& rb) {
  validate(w);
  if (input.channels != w.in_channels)
    throw ConfigError("sparse_conv: input has " + std::to_string(input.channels) +
                      " channels, weights expect " + std::to_string(w.in_channels));
  if (input.features.size() != input.rows() * static_cast<std::size_t>(input.channels))
    throw ValidationError("sparse_conv: feature row count does not match key count");
  if (rb.num_keys != input.keys.size() || rb.key_fingerprint != input.keys.fingerprint() ||
      rb.row_begin.size() != input.keys.size() + 1)
    throw ValidationError("sparse_conv: rulebook was not built from the input key set");
}

// Maps a rulebook offset to the kernel tap, or -1 when a 1x1 kernel ignores it.
int tap_index(const ConvWeights& w, int offset) {
  if (w.kernel == 3) return offset;
  return offset == kCenterOffset ? 0 : -1;
}

}  // namespace

SparseFeature sparse_conv(const SparseFeature& input, const ConvWeights& w, const Rulebook& rb) {
  check_sparse_conv(input, w, rb);
  const int C = w.in_channels, O = w.out_channels;
  const int taps = w.kernel * w.kernel;
  SparseFeature out(input.keys, O);

  // Transpose to [tap][c][o] so the innermost loop runs over output channels.
  std::vector<float> wt(static_cast<std::size_t>(taps) * C * O);
  for (int o = 0; o < O; ++o)
    for (int c = 0; c < C; ++c)
      for (int t = 0; t < taps; ++t)
        wt[(static_cast<std::size_t>(t) * C + c) * O + o] =
            w.weights[(static_cast<std::size_t>(o) * C + c) * taps + t];

  const bool use_bias = !fault::skip_sparse_bias();
  const int n = static_cast<int>(input.rows());
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    float* acc = out.features.data() + static_cast<std::size_t>(i) * O;
    for (int o = 0; o < O; ++o) acc[o] = use_bias ? w.bias[o] : 0.0f;
    for (const RuleEntry& e : rb.for_output(i)) {
      const int t = tap_index(w, e.offset);
      if (t < 0) continue;
      const float* src = input.features.data() + static_cast<std::size_t>(e.input) * C;
      const float* wc = wt.data() + static_cast<std::size_t>(t) * C * O;
      for (int c = 0; c < C; ++c) {
        const float v = src[c];
        const float* wo = wc + static_cast<std::size_t>(c) * O;
        for (int o = 0; o < O; ++o) acc[o] += wo[o] * v;
      }
    }
  }
  return out;
}

namespace reference {

SparseFeature sparse_conv(const SparseFeature& input, const ConvWeights& w, const Rulebook& rb) {
  check_sparse_conv(input, w, rb);
  const int taps = w.kernel * w.kernel;
  const bool use_bias = !fault::skip_sparse_bias();
  SparseFeature out(input.keys, w.out_channels);
  for (std::size_t i = 0; i < input.rows(); ++i)
    for (int o = 0; o < w.out_channels; ++o) {
      float acc = use_bias ? w.bias[o] : 0.0f;
      for (const RuleEntry& e : rb.for_output(i)) {
        const int t = tap_index(w, e.offset);
        if (t < 0) continue;
        auto src = input.row(e.input);
        for (int c = 0; c < w.in_channels; ++c)
          acc += w.weights[(static_cast<std::size_t>(o) * w.in_channels + c) * taps + t] * src[c];
      }
      out.row(i)[o] = acc;
    }
  return out;
}

}  // namespace reference

void relu_inplace(SparseFeature& f) {
  for (float& v : f.features) v = v > 0.0f ? v : 0.0f;
}

}  // namespace qd
