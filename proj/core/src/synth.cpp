#include "cloudpatch/synth.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "cloudpatch/maskgen.hpp"
#include "detail/seed.hpp"

namespace cloudpatch {

namespace {

constexpr std::size_t kBands = 8;

// coastal_blue, blue, green_i, green, yellow, red, red_edge, nir
constexpr std::array<double, kBands> kWaterMean{0.060, 0.055, 0.050, 0.048, 0.042, 0.038, 0.035, 0.025};
constexpr std::array<double, kBands> kWaterAmp{0.012, 0.012, 0.011, 0.011, 0.010, 0.010, 0.009, 0.0075};
constexpr std::array<double, kBands> kLandMean{0.035, 0.042, 0.080, 0.090, 0.100, 0.090, 0.180, 0.290};
constexpr std::array<double, kBands> kLandAmp{0.026, 0.028, 0.026, 0.028, 0.030, 0.032, 0.040, 0.050};
// Bloom response per unit amplitude.
constexpr std::array<double, kBands> kBloomGain{0.05, 0.10, 0.40, 0.60, 0.30, -0.15, 1.00, 0.35};

std::string date_string(std::size_t t) {
  using namespace std::chrono;
  const year_month_day ymd{sys_days{year{2022} / January / 1} + days{6 * static_cast<int>(t)}};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

}  // namespace

void SceneConfig::validate() const {
  if (height < 4 || width < 4 || height % 4 != 0 || width % 4 != 0) {
    throw Error(ErrorKind::kBadConfig, "scene dimensions must be positive multiples of 4");
  }
  if (n_dates < 6) throw Error(ErrorKind::kBadConfig, "scene needs at least 6 dates");
  if (!(bloom_amplitude >= 0.0) || !std::isfinite(bloom_amplitude)) {
    throw Error(ErrorKind::kBadConfig, "bloom amplitude must be finite and >= 0");
  }
  if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd)) {
    throw Error(ErrorKind::kBadConfig, "noise sd must be finite and >= 0");
  }
}

double bloom_curve(std::size_t t, std::size_t n) {
  const double phase = static_cast<double>(t) / static_cast<double>(n - 1);
  const double z = (phase - 0.55) / 0.15;
  return std::exp(-0.5 * z * z);
}

ImageSeries generate_scene(const SceneConfig& cfg) {
  cfg.validate();
  const std::size_t h = cfg.height, w = cfg.width, px = h * w;
  const double hd = static_cast<double>(h), wd = static_cast<double>(w);

  ImageSeries series;
  series.band_metadata = default_band_set();
  series.region = LakeRegion(h, w);

  // Rotated ellipse in normalized coordinates.
  const double angle = 0.5, ca = std::cos(angle), sa = std::sin(angle);
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      const double y = (static_cast<double>(i) + 0.5) / hd - 0.5;
      const double x = (static_cast<double>(j) + 0.5) / wd - 0.5;
      const double u = (ca * x + sa * y) / 0.36, v = (-sa * x + ca * y) / 0.24;
      series.region.set(i, j, u * u + v * v <= 1.0);
    }
  }

  // Shared spatial base: one long-range field per band for water and land,
  // plus a common field so bands stay correlated.
  GrfConfig smooth;
  smooth.variance_sigma2 = 1.0;
  smooth.range_d = 0.8;
  smooth.max_coarse = 32;
  const auto field = [&](std::uint64_t salt) {
    smooth.seed = detail::mix_seed(cfg.seed, salt);
    return sample_grf(h, w, smooth);
  };
  const ScalarField water_common = field(1), land_common = field(2);
  std::vector<double> base(px * kBands);
  for (std::size_t b = 0; b < kBands; ++b) {
    const ScalarField wf = field(10 + b), lf = field(20 + b);
    for (std::size_t p = 0; p < px; ++p) {
      const bool water = series.region[p];
      const double f = std::numbers::sqrt2 / 2.0 * ((water ? water_common : land_common).values[p] +
                                                    (water ? wf : lf).values[p]);
      base[p * kBands + b] = water ? kWaterMean[b] + kWaterAmp[b] * f : kLandMean[b] + kLandAmp[b] * f;
    }
  }

  const double two_pi = 2.0 * std::numbers::pi;
  series.images.reserve(cfg.n_dates);
  for (std::size_t t = 0; t < cfg.n_dates; ++t) {
    const double phase = static_cast<double>(t) / static_cast<double>(cfg.n_dates);
    std::mt19937_64 rng(detail::mix_seed(cfg.seed, 1000 + t));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(-1.0, 1.0);
    const double season = 1.0 + 0.15 * std::sin(two_pi * phase);
    const double illumination = 1.0 + 0.05 * uniform(rng);
    const double bloom = cfg.bloom_amplitude * bloom_curve(t, cfg.n_dates);
    // The patch centre drifts along the lake's major axis.
    const double drift = 0.2 * std::sin(two_pi * phase);
    const double cx = ca * drift, cy = sa * drift;

    MultibandImage img(h, w, kBands, 0.0f, date_string(t));
    auto data = img.data();
    for (std::size_t i = 0; i < h; ++i) {
      const double y = (static_cast<double>(i) + 0.5) / hd - 0.5;
      for (std::size_t j = 0; j < w; ++j) {
        const double x = (static_cast<double>(j) + 0.5) / wd - 0.5;
        const std::size_t p = i * w + j;
        double patch = 0.0;
        if (series.region[p]) {
          const double r2 = ((x - cx) * (x - cx) + (y - cy) * (y - cy)) / (0.15 * 0.15);
          patch = bloom * std::exp(-0.5 * r2);
        }
        for (std::size_t b = 0; b < kBands; ++b) {
          const double v = base[p * kBands + b] * season * illumination + kBloomGain[b] * patch +
                           cfg.noise_sd * normal(rng);
          data[p * kBands + b] = static_cast<float>(std::max(0.0, v));
        }
      }
    }
    series.images.push_back(std::move(img));
  }
  return series;
}

}  // namespace cloudpatch
