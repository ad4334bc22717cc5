#include "querydet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "querydet/errors.hpp"

namespace qd {

DenseTensor::DenseTensor(int c, int h, int w, float fill) : channels(c), height(h), width(w) {
  if (c < 0 || h < 0 || w < 0) throw ConfigError("negative tensor dimension");
  values.assign(static_cast<std::size_t>(c) * h * w, fill);
}

DenseTensor::DenseTensor(int c, int h, int w, std::vector<float> v)
    : channels(c), height(h), width(w), values(std::move(v)) {
  if (c < 0 || h < 0 || w < 0) throw ConfigError("negative tensor dimension");
  if (values.size() != static_cast<std::size_t>(c) * h * w)
    throw ValidationError("tensor value count " + std::to_string(values.size()) +
                          " does not match shape");
}

ConvWeights::ConvWeights(int out, int in, int k)
    : out_channels(out), in_channels(in), kernel(k),
      weights(static_cast<std::size_t>(out) * in * k * k, 0.0f),
      bias(static_cast<std::size_t>(out), 0.0f) {
  validate(*this);
}

bool all_finite(std::span<const float> v) {
  return std::all_of(v.begin(), v.end(), [](float x) { return std::isfinite(x); });
}

void validate(const DenseTensor& t) {
  if (t.values.size() != static_cast<std::size_t>(t.channels) * t.height * t.width)
    throw ValidationError("tensor value count does not match shape");
  if (!all_finite(t.values)) throw ValidationError("tensor contains non-finite values");
}

void validate(const ConvWeights& w) {
  if (w.out_channels <= 0 || w.in_channels <= 0)
    throw ConfigError("conv channel counts must be positive");
  if (w.kernel != 1 && w.kernel != 3)
    throw ConfigError("unsupported kernel size " + std::to_string(w.kernel));
  if (w.weights.size() !=
      static_cast<std::size_t>(w.out_channels) * w.in_channels * w.kernel * w.kernel)
    throw ConfigError("conv weight count does not match shape");
  if (w.bias.size() != static_cast<std::size_t>(w.out_channels))
    throw ConfigError("conv bias count does not match out_channels");
}

namespace {

void check_conv_inputs(const DenseTensor& input, const ConvWeights& w) {
  validate(w);
  if (input.channels != w.in_channels)
    throw ConfigError("conv2d: input has " + std::to_string(input.channels) +
                      " channels, weights expect " + std::to_string(w.in_channels));
  validate(input);
}

}  // namespace

DenseTensor conv2d(const DenseTensor& input, const ConvWeights& w) {
  check_conv_inputs(input, w);
  const int H = input.height, W = input.width, C = input.channels;
  const int K = w.kernel, pad = (K - 1) / 2;
  DenseTensor out(w.out_channels, H, W);
  if (H == 0 || W == 0) return out;

  const float* in = input.values.data();
  float* dst = out.values.data();
  const std::size_t plane = input.plane();

  // Each (o, y) row is owned by one thread; inside it the x loop is the
  // innermost, so every output still sees bias, then c, ky, kx in order.
#pragma omp parallel for collapse(2) schedule(static)
  for (int o = 0; o < w.out_channels; ++o) {
    for (int y = 0; y < H; ++y) {
      float* row = dst + o * plane + static_cast<std::size_t>(y) * W;
      std::fill(row, row + W, w.bias[o]);
      for (int c = 0; c < C; ++c) {
        const float* src = in + c * plane;
        for (int ky = 0; ky < K; ++ky) {
          const int iy = y + ky - pad;
          if (iy < 0 || iy >= H) continue;
          const float* srow = src + static_cast<std::size_t>(iy) * W;
          for (int kx = 0; kx < K; ++kx) {
            const float wt = w.w(o, c, ky, kx);
            const int shift = kx - pad;
            const int x0 = std::max(0, -shift);
            const int x1 = std::min(W, W - shift);
            const float* s = srow + shift;
            for (int x = x0; x < x1; ++x) row[x] += wt * s[x];
          }
        }
      }
    }
  }
  return out;
}

namespace reference {

DenseTensor conv2d(const DenseTensor& input, const ConvWeights& w) {
  check_conv_inputs(input, w);
  const int H = input.height, W = input.width, C = input.channels;
  const int K = w.kernel, pad = (K - 1) / 2;
  DenseTensor out(w.out_channels, H, W);
  for (int o = 0; o < w.out_channels; ++o)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        float acc = w.bias[o];
        for (int c = 0; c < C; ++c)
          for (int ky = 0; ky < K; ++ky)
            for (int kx = 0; kx < K; ++kx) {
              const int iy = y + ky - pad, ix = x + kx - pad;
              if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
              acc += w.w(o, c, ky, kx) * input.at(c, iy, ix);
            }
        out.at(o, y, x) = acc;
      }
  return out;
}

}  // namespace reference

void relu_inplace(DenseTensor& t) {
  for (float& v : t.values) v = v > 0.0f ? v : 0.0f;
}

DenseTensor relu(const DenseTensor& input) {
  DenseTensor out = input;
  relu_inplace(out);
  return out;
}

float sigmoid(float x) { return 1.0f / (1.0f + std::exp(-x)); }

DenseTensor sigmoid(const DenseTensor& input) {
  DenseTensor out = input;
  for (float& v : out.values) v = sigmoid(v);
  return out;
}

}  // namespace qd
