#include "querydet/model.hpp"

#include <cmath>
#include <random>
#include <string>

#include "querydet/errors.hpp"

namespace qd {

const DenseTensor& FeaturePyramid::level(int l) const {
  auto it = levels.find(l);
  if (it == levels.end()) throw ConfigError("pyramid has no level " + std::to_string(l));
  return it->second;
}

void FeaturePyramid::validate() const {
  if (levels.empty()) throw ConfigError("pyramid has no levels");
  if (image_height <= 0 || image_width <= 0) throw ConfigError("pyramid image dims must be positive");
  for (const auto& [l, t] : levels) {
    if (l < kMinPyramidLevel || l > kMaxPyramidLevel)
      throw ConfigError("pyramid level " + std::to_string(l) + " outside [2, 7]");
    if (t.channels != channels)
      throw ConfigError("pyramid level " + std::to_string(l) + " has " + std::to_string(t.channels) +
                        " channels, expected " + std::to_string(channels));
    if (t.height != level_dim(image_height, l) || t.width != level_dim(image_width, l))
      throw ConfigError("pyramid level " + std::to_string(l) + " dims do not follow floor(H/2^l)");
  }
}

int HeadWeights::predictor_channels(Branch b) const {
  switch (b) {
    case Branch::kCls: return num_anchors * num_classes;
    case Branch::kReg: return num_anchors * 4;
    case Branch::kQuery: return 1;
  }
  return 0;
}

namespace {
constexpr const char* kBranchNames[3] = {"cls", "reg", "query"};
}

std::vector<std::pair<std::string, const ConvWeights*>> HeadWeights::roles() const {
  std::vector<std::pair<std::string, const ConvWeights*>> out;
  for (int b = 0; b < 3; ++b)
    for (int i = 0; i < kTowerDepth; ++i)
      out.emplace_back(std::string(kBranchNames[b]) + "_tower." + std::to_string(i), &towers[b][i]);
  for (int b = 0; b < 3; ++b) out.emplace_back(std::string(kBranchNames[b]) + "_pred", &predictors[b]);
  return out;
}

std::vector<std::pair<std::string, ConvWeights*>> HeadWeights::roles() {
  std::vector<std::pair<std::string, ConvWeights*>> out;
  for (auto& [name, conv] : std::as_const(*this).roles())
    out.emplace_back(name, const_cast<ConvWeights*>(conv));
  return out;
}

void HeadWeights::validate() const {
  if (channels <= 0 || num_anchors <= 0 || num_classes <= 0)
    throw ConfigError("head dims must be positive");
  for (int b = 0; b < 3; ++b) {
    for (const ConvWeights& c : towers[b]) {
      qd::validate(c);
      if (c.in_channels != channels || c.out_channels != channels)
        throw ConfigError(std::string(kBranchNames[b]) + " tower conv is not C->C");
    }
    const ConvWeights& p = predictors[b];
    qd::validate(p);
    if (p.in_channels != channels || p.out_channels != predictor_channels(static_cast<Branch>(b)))
      throw ConfigError(std::string(kBranchNames[b]) + " predictor has wrong channel counts");
  }
}

namespace {

DenseTensor run_dense_branch(const DenseTensor& feature, const HeadWeights& w, Branch b) {
  DenseTensor x = conv2d(feature, w.tower(b)[0]);
  relu_inplace(x);
  for (int i = 1; i < kTowerDepth; ++i) {
    x = conv2d(x, w.tower(b)[i]);
    relu_inplace(x);
  }
  return conv2d(x, w.predictor(b));
}

SparseFeature run_sparse_branch(const SparseFeature& feature, const Rulebook& rb,
                                const HeadWeights& w, Branch b) {
  SparseFeature x = sparse_conv(feature, w.tower(b)[0], rb);
  relu_inplace(x);
  for (int i = 1; i < kTowerDepth; ++i) {
    x = sparse_conv(x, w.tower(b)[i], rb);
    relu_inplace(x);
  }
  return sparse_conv(x, w.predictor(b), rb);
}

}  // namespace

DenseHeadOutput run_dense_head(const DenseTensor& feature, const HeadWeights& w) {
  if (feature.channels != w.channels)
    throw ConfigError("head expects " + std::to_string(w.channels) + " channels, feature has " +
                      std::to_string(feature.channels));
  return DenseHeadOutput{run_dense_branch(feature, w, Branch::kCls),
                         run_dense_branch(feature, w, Branch::kReg),
                         run_dense_branch(feature, w, Branch::kQuery)};
}

SparseHeadOutput run_sparse_head(const SparseFeature& value_features, const HeadWeights& w) {
  return run_sparse_head(value_features, w, build_rulebook(value_features.keys));
}

SparseHeadOutput run_sparse_head(const SparseFeature& value_features, const HeadWeights& w, const Rulebook& rb) {
  if (value_features.channels != w.channels)
    throw ConfigError("head expects " + std::to_string(w.channels) + " channels, features have " +
                      std::to_string(value_features.channels));
  return SparseHeadOutput{run_sparse_branch(value_features, rb, w, Branch::kCls),
                          run_sparse_branch(value_features, rb, w, Branch::kReg),
                          run_sparse_branch(value_features, rb, w, Branch::kQuery)};
}

SparseHeadOutput gather_head_output(const DenseHeadOutput& dense, const KeySet& keys) {
  return SparseHeadOutput{gather(dense.cls_logits, keys), gather(dense.reg_deltas, keys),
                          gather(dense.query_logits, keys)};
}

double prior_bias(double pi) { return -std::log((1.0 - pi) / pi); }

namespace {

// Mean of the positive center taps before fan-in scaling.
constexpr double kCenterMean = 1.5;
constexpr double kSideSpread = 0.25;
constexpr int kChainedConvs = kTowerDepth + 1;

}  // namespace

double fixture_unit_amplitude(int channels) {
  // Per-layer gain on a flat positive patch: C * kCenterMean / sqrt(9C).
  const double gain = kCenterMean * std::sqrt(static_cast<double>(channels)) / 3.0;
  return 1.0 / std::pow(gain, kChainedConvs);
}

FeaturePyramid make_synthetic_pyramid(const SyntheticPyramidSpec& spec) {
  if (spec.min_level < kMinPyramidLevel || spec.max_level > kMaxPyramidLevel ||
      spec.min_level > spec.max_level)
    throw ConfigError("invalid level range [" + std::to_string(spec.min_level) + ", " +
                      std::to_string(spec.max_level) + "]");
  if (spec.image_height <= 0 || spec.image_width <= 0) throw ConfigError("image dims must be positive");
  if (spec.channels <= 0) throw ConfigError("channel count must be positive");

  FeaturePyramid pyr;
  pyr.image_height = spec.image_height;
  pyr.image_width = spec.image_width;
  pyr.channels = spec.channels;

  const double unit = fixture_unit_amplitude(spec.channels);
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<float> noise(0.0f, static_cast<float>(spec.noise * unit));
  std::uniform_real_distribution<double> jitter(0.75, 1.25);

  for (int l = spec.min_level; l <= spec.max_level; ++l) {
    const int H = level_dim(spec.image_height, l), W = level_dim(spec.image_width, l);
    DenseTensor t(spec.channels, H, W);
    for (float& v : t.values) v = noise(rng);
    for (const Blob& b : spec.blobs) {
      const int bx = static_cast<int>(std::floor(b.cx / (1 << l)));
      const int by = static_cast<int>(std::floor(b.cy / (1 << l)));
      for (int c = 0; c < spec.channels; ++c) {
        const double amp = b.strength * unit * jitter(rng);
        for (int dy = -2; dy <= 2; ++dy)
          for (int dx = -2; dx <= 2; ++dx) {
            const int x = bx + dx, y = by + dy;
            if (x < 0 || y < 0 || x >= W || y >= H) continue;
            // Tight bump peaked on the blob's own cell; neighbors get e^-3 of the peak.
            t.at(c, y, x) += static_cast<float>(amp * std::exp(-3.0 * (dx * dx + dy * dy)));
          }
      }
    }
    pyr.levels.emplace(l, std::move(t));
  }
  return pyr;
}

std::vector<Blob> random_blobs(std::uint64_t seed, int count, int image_height, int image_width, double margin) {
  if (count < 0) throw ConfigError("blob count must be non-negative");
  if (!(image_height > 2 * margin && image_width > 2 * margin)) throw ConfigError("image too small for blob margin");
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> ux(margin, image_width - margin), uy(margin, image_height - margin);
  std::uniform_real_distribution<double> size(6, 14);
  std::uniform_int_distribution<int> cls(0, 3);
  std::vector<Blob> blobs;
  for (int i = 0; i < count; ++i) {
    Blob b;
    b.cx = ux(rng);
    b.cy = uy(rng);
    b.size = size(rng);
    b.cls = cls(rng);
    blobs.push_back(b);
  }
  return blobs;
}

HeadWeights make_fixture_weights(std::uint64_t seed, int channels, int num_anchors, int num_classes) {
  if (channels <= 0 || num_anchors <= 0 || num_classes <= 0)
    throw ConfigError("head dims must be positive");
  HeadWeights hw;
  hw.channels = channels;
  hw.num_anchors = num_anchors;
  hw.num_classes = num_classes;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> signed_unit(-1.0, 1.0);
  std::uniform_real_distribution<double> center(kCenterMean - 0.5, kCenterMean + 0.5);

  auto fill = [&](ConvWeights& cw, bool responsive) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(cw.in_channels) * cw.kernel * cw.kernel);
    const int mid = cw.kernel / 2;
    for (int o = 0; o < cw.out_channels; ++o)
      for (int c = 0; c < cw.in_channels; ++c)
        for (int ky = 0; ky < cw.kernel; ++ky)
          for (int kx = 0; kx < cw.kernel; ++kx) {
            double v = signed_unit(rng);
            if (responsive) v = (ky == mid && kx == mid) ? center(rng) : kSideSpread * v;
            cw.w(o, c, ky, kx) = static_cast<float>(v * scale);
          }
  };

  for (int b = 0; b < 3; ++b) {
    const bool responsive = b != static_cast<int>(Branch::kReg);
    for (ConvWeights& cw : hw.towers[b]) {
      cw = ConvWeights(channels, channels, 3);
      fill(cw, responsive);
    }
    ConvWeights& p = hw.predictors[b];
    p = ConvWeights(hw.predictor_channels(static_cast<Branch>(b)), channels, 3);
    fill(p, responsive);
    if (responsive) std::fill(p.bias.begin(), p.bias.end(), static_cast<float>(prior_bias()));
  }
  return hw;
}

}  // namespace qd
