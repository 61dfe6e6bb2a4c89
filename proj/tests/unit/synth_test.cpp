#include <doctest.h>

#include <cmath>

#include "cloudpatch/indices.hpp"
#include "cloudpatch/synth.hpp"
#include "oracles.hpp"

using namespace cloudpatch;

namespace {

double mean_ndci(const ImageSeries& s, std::size_t t) {
  ImageSeries one{{s.images[t]}, s.region, s.band_metadata};
  return series_mean_index(one, IndexKind::kNdci).mean_values[0];
}

}  // namespace

TEST_CASE("scene config validation") {
  SceneConfig c;
  CHECK_NOTHROW(c.validate());
  c.height = 30;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.n_dates = 5;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.noise_sd = -1.0;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("scene is deterministic, seed-sensitive and well formed") {
  SceneConfig c;
  c.n_dates = 8;
  c.seed = 1;
  const auto a = generate_scene(c);
  const auto b = generate_scene(c);
  CHECK_NOTHROW(a.validate());
  REQUIRE(a.images.size() == 8);
  CHECK(a.images[0].date() == "2022-01-01");
  CHECK(a.images[1].date() == "2022-01-07");
  CHECK(a.region.count() > 0);
  CHECK(a.region.count() < a.region.height() * a.region.width());
  for (std::size_t t = 0; t < 8; ++t) {
    CHECK(std::equal(a.images[t].data().begin(), a.images[t].data().end(), b.images[t].data().begin()));
    for (float v : a.images[t].data()) CHECK(v >= 0.0f);
  }
  c.seed = 2;
  const auto d = generate_scene(c);
  CHECK_FALSE(std::equal(a.images[0].data().begin(), a.images[0].data().end(), d.images[0].data().begin()));
}

TEST_CASE("neighbouring pixels are correlated in every band") {
  SceneConfig c;
  c.n_dates = 6;
  const auto s = generate_scene(c);
  const auto& img = s.images[2];
  for (std::size_t b = 0; b < 8; ++b) {
    std::vector<double> left, right;
    for (std::size_t i = 0; i < img.height(); ++i) {
      for (std::size_t j = 0; j + 1 < img.width(); ++j) {
        left.push_back(img.at(i, j, b));
        right.push_back(img.at(i, j + 1, b));
      }
    }
    CAPTURE(b);
    CHECK(oracle::pearson(left, right) > 0.5);
  }
}

TEST_CASE("bloom raises NDCI at its peak and vanishes at zero amplitude") {
  SceneConfig c;
  c.seed = 4;
  const auto bloom = generate_scene(c);
  c.bloom_amplitude = 0.0;
  const auto plain = generate_scene(c);
  std::size_t peak = 0;
  for (std::size_t t = 0; t < c.n_dates; ++t) {
    if (bloom_curve(t, c.n_dates) > bloom_curve(peak, c.n_dates)) peak = t;
  }
  CHECK(mean_ndci(bloom, peak) > mean_ndci(bloom, 0));
  CHECK(mean_ndci(bloom, peak) > mean_ndci(plain, peak));
  const double reference = mean_ndci(plain, 0);
  for (std::size_t t = 0; t < c.n_dates; ++t) CHECK(std::abs(mean_ndci(plain, t) - reference) < 0.05);
}
