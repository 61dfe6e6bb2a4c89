#pragma once

#include <cstddef>
#include <cstdint>

#include "cloudpatch/raster.hpp"

namespace cloudpatch {

// Synthetic lake scene: an elliptical lake in land, eight bands, smooth
// spatial fields, a seasonal bloom patch and Gaussian noise.
struct SceneConfig {
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t n_dates = 60;
  std::uint64_t seed = 0;
  double bloom_amplitude = 0.04;  // peak red-edge increase, reflectance
  double noise_sd = 0.01;         // reflectance

  void validate() const;
};

// Dates start at 2022-01-01 and advance in 6-day steps.
ImageSeries generate_scene(const SceneConfig& cfg);

// Seasonal bloom intensity in [0, 1] for date index t of n.
double bloom_curve(std::size_t t, std::size_t n);

}  // namespace cloudpatch
