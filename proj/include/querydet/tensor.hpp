#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace qd {

// Channel-major (C, then rows, then columns) dense feature map.
struct DenseTensor {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> values;

  DenseTensor() = default;
  DenseTensor(int c, int h, int w, float fill = 0.0f);
  DenseTensor(int c, int h, int w, std::vector<float> v);

  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  std::size_t size() const { return values.size(); }

  float& at(int c, int y, int x) {
    return values[static_cast<std::size_t>(c) * plane() + static_cast<std::size_t>(y) * width + x];
  }
  float at(int c, int y, int x) const {
    return values[static_cast<std::size_t>(c) * plane() + static_cast<std::size_t>(y) * width + x];
  }

  std::span<float> channel(int c) { return {values.data() + c * plane(), plane()}; }
  std::span<const float> channel(int c) const { return {values.data() + c * plane(), plane()}; }

  bool same_shape(const DenseTensor& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }
  bool operator==(const DenseTensor&) const = default;
};

// Square-kernel convolution weights, layout [out][in][ky][kx].
struct ConvWeights {
  int out_channels = 0;
  int in_channels = 0;
  int kernel = 3;
  std::vector<float> weights;
  std::vector<float> bias;

  ConvWeights() = default;
  ConvWeights(int out, int in, int k);

  float& w(int o, int c, int ky, int kx) {
    return weights[((static_cast<std::size_t>(o) * in_channels + c) * kernel + ky) * kernel + kx];
  }
  float w(int o, int c, int ky, int kx) const {
    return weights[((static_cast<std::size_t>(o) * in_channels + c) * kernel + ky) * kernel + kx];
  }
  bool operator==(const ConvWeights&) const = default;
};

// Throws ValidationError if the value count or any value is off.
void validate(const DenseTensor& t);
// Throws ConfigError on inconsistent counts or an unsupported kernel size.
void validate(const ConvWeights& w);

bool all_finite(std::span<const float> v);

// Stride 1, zero padding (k-1)/2. Per output: bias, then c outer, ky, kx inner.
// Parallel over output channels and rows; bitwise equal to reference::conv2d.
DenseTensor conv2d(const DenseTensor& input, const ConvWeights& w);

DenseTensor relu(const DenseTensor& input);
void relu_inplace(DenseTensor& t);
DenseTensor sigmoid(const DenseTensor& input);

float sigmoid(float x);

namespace reference {

// Serial kernel with the same accumulation order as qd::conv2d.
DenseTensor conv2d(const DenseTensor& input, const ConvWeights& w);

}  // namespace reference
}  // namespace qd
