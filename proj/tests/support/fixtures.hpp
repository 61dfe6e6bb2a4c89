#pragma once

// Small constructed scenes shared by the unit and acceptance tests.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "cloudpatch/indices.hpp"
#include "cloudpatch/maskgen.hpp"
#include "cloudpatch/raster.hpp"

namespace fixture {

using namespace cloudpatch;

// Uniform 8-band image whose standard NDCI is `value` at every pixel.
inline MultibandImage ndci_image(double value, std::string date, std::size_t side = 8) {
  const double red = 0.1;
  const double red_edge = red * (1.0 + value) / (1.0 - value);
  MultibandImage img(side, side, 8, 0.05f, std::move(date));
  for (std::size_t i = 0; i < side; ++i) {
    for (std::size_t j = 0; j < side; ++j) {
      img.at(i, j, kRedBand) = static_cast<float>(red);
      img.at(i, j, kRedEdgeBand) = static_cast<float>(red_edge);
    }
  }
  return img;
}

// Ten dates: six low, three moderate-to-high, one bloom-risk spatial mean.
inline ImageSeries ndci_ten_day_series() {
  const double values[10] = {-0.2, -0.1, 0.05, -0.3, 0.3, -0.05, 0.02, -0.15, 0.08, -0.25};
  ImageSeries s;
  s.band_metadata = default_band_set();
  s.region = LakeRegion(8, 8, 1);
  for (int d = 0; d < 10; ++d) {
    s.images.push_back(ndci_image(values[d], "2023-03-" + std::string(d < 9 ? "0" : "") + std::to_string(d + 1)));
  }
  return s;
}

// Band b holds a_b * i + c_b * j + e_b.
inline MultibandImage planar_ramp(std::size_t h, std::size_t w, std::size_t bands) {
  MultibandImage img(h, w, bands);
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      for (std::size_t b = 0; b < bands; ++b) {
        const double a = 0.01 * static_cast<double>(b + 1), c = -0.004 * static_cast<double>(b) + 0.003;
        img.at(i, j, b) = static_cast<float>(a * static_cast<double>(i) + c * static_cast<double>(j) + 0.2);
      }
    }
  }
  return img;
}

// GRF gaps covering round(0.1 * H * W) cells, all inside the one-pixel border ring.
inline CloudMask interior_gap_mask(std::size_t h, std::size_t w, std::uint64_t seed) {
  GrfConfig g;
  g.seed = seed;
  const double k = std::round(0.1 * static_cast<double>(h * w));
  const auto inner = threshold_mask(sample_grf(h - 2, w - 2, g), k / static_cast<double>((h - 2) * (w - 2)));
  CloudMask m(h, w);
  for (std::size_t i = 0; i + 2 < h; ++i) {
    for (std::size_t j = 0; j + 2 < w; ++j) m.set(i + 1, j + 1, inner.at(i, j));
  }
  return m;
}

}  // namespace fixture
