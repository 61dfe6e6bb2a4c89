#include "cloudpatch/baseline.hpp"

#include <cmath>
#include <optional>

namespace cloudpatch {

namespace {

// Linear estimate for position `at` along a line of `len` cells read through
// `value(k)`, or nullopt when the line holds no finite cell.
template <class Get>
std::optional<double> axis_estimate(std::size_t at, std::size_t len, Get value) {
  std::optional<std::size_t> lo;
  std::optional<std::size_t> hi;
  for (std::size_t k = at; k-- > 0;) {
    if (std::isfinite(value(k))) {
      lo = k;
      break;
    }
  }
  for (std::size_t k = at + 1; k < len; ++k) {
    if (std::isfinite(value(k))) {
      hi = k;
      break;
    }
  }
  if (lo && hi) {
    const double t = static_cast<double>(at - *lo) / static_cast<double>(*hi - *lo);
    return (1.0 - t) * value(*lo) + t * value(*hi);
  }
  if (lo) return static_cast<double>(value(*lo));
  if (hi) return static_cast<double>(value(*hi));
  return std::nullopt;
}

}  // namespace

std::vector<float> interpolate_band(std::span<const float> band, std::size_t height,
                                    std::size_t width) {
  if (band.size() != height * width) {
    throw Error(ErrorKind::kDimMismatch, "band length does not match H*W");
  }
  double sum = 0.0;
  std::size_t finite = 0;
  for (float v : band) {
    if (std::isfinite(v)) {
      sum += v;
      ++finite;
    }
  }
  if (finite == 0) throw Error(ErrorKind::kAllMissing, "band has no finite value");
  const double global_mean = sum / static_cast<double>(finite);

  std::vector<float> out(band.begin(), band.end());
  for (std::size_t i = 0; i < height; ++i) {
    for (std::size_t j = 0; j < width; ++j) {
      if (std::isfinite(band[i * width + j])) continue;
      const auto row = axis_estimate(j, width, [&](std::size_t k) { return band[i * width + k]; });
      const auto col = axis_estimate(i, height, [&](std::size_t k) { return band[k * width + j]; });
      double fill = global_mean;
      if (row && col) {
        fill = 0.5 * (*row + *col);
      } else if (row) {
        fill = *row;
      } else if (col) {
        fill = *col;
      }
      out[i * width + j] = static_cast<float>(fill);
    }
  }
  return out;
}

MultibandImage interpolate_image(const MultibandImage& x) {
  MultibandImage out = x;
  for (std::size_t b = 0; b < x.bands(); ++b) {
    try {
      out.set_band_plane(b, interpolate_band(x.band_plane(b), x.height(), x.width()));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kAllMissing) throw;
      throw Error(ErrorKind::kAllMissing, "band " + std::to_string(b + 1) + " of " + x.date() +
                                              " has no finite value");
    }
  }
  return out;
}

}  // namespace cloudpatch
