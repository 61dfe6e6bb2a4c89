#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cloudpatch/raster.hpp"

namespace cloudpatch {

// Fills NaN cells of one row-major H x W band. Each gap takes the mean of its
// row estimate and column estimate, where an axis estimate is the linear
// interpolation between the nearest finite cells on either side (or the one
// nearest finite cell when only one side has data). Gaps with no finite cell
// in their row or column take the band's global finite mean. Finite cells pass
// through unchanged. Throws AllMissing when nothing is finite.
std::vector<float> interpolate_band(std::span<const float> band, std::size_t height,
                                    std::size_t width);

// interpolate_band for every band independently.
MultibandImage interpolate_image(const MultibandImage& x);

}  // namespace cloudpatch
