#pragma once

#include "querydet/model.hpp"
#include "querydet/targets.hpp"

namespace qd::fixtures {

struct Fixture {
  SyntheticPyramidSpec spec;
  FeaturePyramid pyramid;
  HeadWeights weights;
};

inline Fixture make_fixture(std::uint64_t seed, int channels = 16, int image = 512, int blobs = 3) {
  Fixture f;
  f.spec = SyntheticPyramidSpec{.seed = seed,
                                .image_height = image,
                                .image_width = image,
                                .min_level = 2,
                                .max_level = 7,
                                .channels = channels,
                                .blobs = random_blobs(seed, blobs, image, image)};
  f.pyramid = make_synthetic_pyramid(f.spec);
  f.weights = make_fixture_weights(seed + 1000, channels, 1, 4);
  return f;
}

// Blobs with strengths spread evenly over [weakest, strongest], so query
// scores cover the whole sigma range instead of sitting near 0 or 1.
inline Fixture make_graded_fixture(std::uint64_t seed, int channels, int image, int blobs, double weakest,
                                   double strongest) {
  Fixture f = make_fixture(seed, channels, image, blobs);
  for (int i = 0; i < blobs; ++i)
    f.spec.blobs[i].strength = blobs == 1 ? strongest : weakest + (strongest - weakest) * i / (blobs - 1);
  f.pyramid = make_synthetic_pyramid(f.spec);
  return f;
}

}  // namespace qd::fixtures
