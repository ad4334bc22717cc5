// Test-only reference computations. Nothing here calls into the kernels it
// is used to check.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "querydet/model.hpp"
#include "querydet/tensor.hpp"

namespace qd::oracle {

inline DenseTensor random_tensor(std::uint64_t seed, int c, int h, int w, float lo = -1.0f, float hi = 1.0f) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> d(lo, hi);
  DenseTensor t(c, h, w);
  for (float& v : t.values) v = d(rng);
  return t;
}

inline ConvWeights random_conv(std::uint64_t seed, int out, int in, int k = 3) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> d(-0.5f, 0.5f);
  ConvWeights w(out, in, k);
  for (float& v : w.weights) v = d(rng);
  for (float& v : w.bias) v = d(rng);
  return w;
}

// Quadruple loop in double over an explicitly zero-padded input.
inline std::vector<double> conv2d_brute(const DenseTensor& in, const ConvWeights& w) {
  const int H = in.height, W = in.width, K = w.kernel, p = (K - 1) / 2;
  const int PH = H + 2 * p, PW = W + 2 * p;
  std::vector<double> padded(static_cast<std::size_t>(in.channels) * PH * PW, 0.0);
  for (int c = 0; c < in.channels; ++c)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x)
        padded[(static_cast<std::size_t>(c) * PH + y + p) * PW + x + p] = in.at(c, y, x);
  std::vector<double> out(static_cast<std::size_t>(w.out_channels) * H * W);
  for (int o = 0; o < w.out_channels; ++o)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        double acc = w.bias[o];
        for (int c = 0; c < in.channels; ++c)
          for (int ky = 0; ky < K; ++ky)
            for (int kx = 0; kx < K; ++kx)
              acc += static_cast<double>(w.w(o, c, ky, kx)) *
                     padded[(static_cast<std::size_t>(c) * PH + y + ky) * PW + x + kx];
        out[(static_cast<std::size_t>(o) * H + y) * W + x] = acc;
      }
  return out;
}

inline DenseTensor to_tensor(const std::vector<double>& v, int c, int h, int w) {
  DenseTensor t(c, h, w);
  for (std::size_t i = 0; i < v.size(); ++i) t.values[i] = static_cast<float>(v[i]);
  return t;
}

inline DenseTensor conv2d_oracle(const DenseTensor& in, const ConvWeights& w) {
  return to_tensor(conv2d_brute(in, w), w.out_channels, in.height, in.width);
}

// One head branch composed from the double-precision oracle conv.
inline DenseTensor branch_oracle(const DenseTensor& feature, const HeadWeights& hw, Branch b) {
  DenseTensor x = feature;
  for (const ConvWeights& c : hw.tower(b)) {
    x = conv2d_oracle(x, c);
    for (float& v : x.values) v = std::max(v, 0.0f);
  }
  return conv2d_oracle(x, hw.predictor(b));
}

// max |a - b| / max(1, max |b|): relative to the magnitude of the reference map.
inline double rel_error(std::span<const float> a, std::span<const float> b) {
  double num = 0, scale = 1.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num = std::max(num, std::abs(static_cast<double>(a[i]) - b[i]));
    scale = std::max(scale, std::abs(static_cast<double>(b[i])));
  }
  return num / scale;
}

inline double rel_error(const DenseTensor& a, const DenseTensor& b) { return rel_error(a.values, b.values); }

// Brute-force query target: every cell against every small center.
inline std::vector<int> query_target_brute(const std::vector<std::array<double, 4>>& objects, int level, int h,
                                           int w, double base) {
  std::vector<int> out(static_cast<std::size_t>(h) * w, 0);
  const double stride = std::pow(2.0, level);
  const double s_l = base * stride;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (const auto& o : objects) {
        if (!(std::max(o[2], o[3]) < s_l)) continue;
        const double gx = std::floor(o[0] / stride), gy = std::floor(o[1] / stride);
        const double d = std::sqrt((x - gx) * (x - gx) + (y - gy) * (y - gy));
        if (d < s_l / stride) out[static_cast<std::size_t>(y) * w + x] = 1;
      }
  return out;
}

// Direct formulas in long double, no stabilization tricks.
inline double focal_oracle(const std::vector<float>& logits, const std::vector<float>& target, double alpha,
                           double gamma) {
  long double sum = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const long double p = 1.0L / (1.0L + std::exp(-static_cast<long double>(logits[i])));
    const bool pos = target[i] > 0.5f;
    const long double pt = pos ? p : 1.0L - p;
    const long double at = pos ? alpha : 1.0L - alpha;
    sum += -at * std::pow(1.0L - pt, static_cast<long double>(gamma)) * std::log(pt);
  }
  return static_cast<double>(sum / logits.size());
}

inline double smooth_l1_oracle(const std::vector<float>& a, const std::vector<float>& b) {
  long double sum = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const long double d = std::fabs(static_cast<long double>(a[i]) - b[i]);
    sum += d < 1 ? 0.5L * d * d : d - 0.5L;
  }
  return static_cast<double>(sum / a.size());
}

}  // namespace qd::oracle
