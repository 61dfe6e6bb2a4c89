#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "cloudpatch/raster.hpp"

namespace cloudpatch {

// Exponential-covariance Gaussian random field used to shape artificial gaps.
struct GrfConfig {
  double variance_sigma2 = 0.95;
  double range_d = 0.4;
  double mask_ratio = 0.10;
  std::uint64_t seed = 0;
  // Upper bound on the coarse lattice side used for the Cholesky draw.
  std::size_t max_coarse = 64;

  void validate() const;
};

struct ScalarField {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;  // row-major

  double at(std::size_t row, std::size_t col) const { return values[row * width + col]; }
};

// Draws a zero-mean stationary field with cov(s,s') = sigma2 * exp(-|s-s'| / d)
// over pixel centres mapped into the unit square. The draw is exact on a
// lattice of at most max_coarse per side and bilinearly resampled above that.
ScalarField sample_grf(std::size_t height, std::size_t width, const GrfConfig& cfg);

// Masks exactly round(ratio * H * W) cells: the smallest field values, ties by
// row-major index.
CloudMask threshold_mask(const ScalarField& field, double ratio);

// Sets every band of masked cells to NaN.
MultibandImage apply_mask(const MultibandImage& target, const CloudMask& mask);

// Image i gets its own draw with seed cfg.seed + i.
std::pair<ImageSeries, std::vector<CloudMask>> mask_series(const ImageSeries& series,
                                                           const GrfConfig& cfg);

// Convenience: sample_grf followed by threshold_mask.
CloudMask generate_mask(std::size_t height, std::size_t width, const GrfConfig& cfg);

}  // namespace cloudpatch
