#include <doctest.h>

#include <cmath>

#include "cloudpatch/indices.hpp"
#include "fixtures.hpp"

using namespace cloudpatch;

TEST_CASE("ndci: hand values, orientation antisymmetry, guards") {
  const LakeRegion all(8, 8, 1);
  auto img = fixture::ndci_image(0.0, "d");
  img.at(0, 0, kRedBand) = 0.02f;
  img.at(0, 0, kRedEdgeBand) = 0.06f;
  img.at(0, 1, kRedBand) = 0.0f;
  img.at(0, 1, kRedEdgeBand) = 0.0f;
  const auto s = ndci(img, all);
  const auto p = ndci(img, all, NdciOrientation::kPrinted);
  CHECK(s.at(0, 0) == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(std::isnan(s.at(0, 1)));
  CHECK(s.at(3, 3) == doctest::Approx(0.0));
  for (std::size_t k = 0; k < s.values.size(); ++k) {
    if (std::isnan(s.values[k])) CHECK(std::isnan(p.values[k]));
    else CHECK(p.values[k] == -s.values[k]);
  }
  LakeRegion part(8, 8);
  part.set(2, 2, true);
  const auto r = ndci(img, part);
  CHECK(std::isnan(r.at(0, 0)));
  CHECK_FALSE(std::isnan(r.at(2, 2)));
  CHECK_THROWS_AS(ndci(img, LakeRegion(4, 4, 1)), Error);
}

TEST_CASE("green_red ratio") {
  auto img = fixture::ndci_image(0.0, "d");
  img.at(1, 1, kGreenBand) = 0.05f;
  img.at(1, 1, kRedBand) = 0.05f;
  img.at(2, 2, kRedBand) = 0.0f;
  const auto g = green_red(img, LakeRegion(8, 8, 1));
  CHECK(g.at(1, 1) == 1.0);
  CHECK(std::isnan(g.at(2, 2)));
}

TEST_CASE("classification boundaries") {
  CHECK(classify_ndci(-0.05) == AlgalCategory::kLow);
  CHECK(classify_ndci(0.0) == AlgalCategory::kModerateHigh);
  CHECK(classify_ndci(0.1) == AlgalCategory::kModerateHigh);
  CHECK(classify_ndci(0.15) == AlgalCategory::kBloomRisk);
  try {
    classify_ndci(std::nan(""));
    FAIL("expected NonFinite");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kNonFinite);
  }
}

TEST_CASE("names parse and print") {
  CHECK(parse_index_kind("ndci") == IndexKind::kNdci);
  CHECK(parse_index_kind(to_string(IndexKind::kGreenRed)) == IndexKind::kGreenRed);
  CHECK(parse_orientation("printed") == NdciOrientation::kPrinted);
  CHECK_THROWS_AS(parse_orientation("sideways"), Error);
  CHECK(to_string(AlgalCategory::kBloomRisk) == "bloom_risk");
}

TEST_CASE("ten-day fixture: fractions and self comparison") {
  const auto series = fixture::ndci_ten_day_series();
  const auto idx = series_mean_index(series, IndexKind::kNdci);
  REQUIRE(idx.dates.size() == 10);
  const auto f = category_fractions(idx);
  CHECK(f.low == 0.6);
  CHECK(f.moderate_high == 0.3);
  CHECK(f.bloom_risk == 0.1);
  const auto c = compare_series(idx, idx);
  CHECK(c.pearson_r == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(c.rmse == 0.0);
  REQUIRE(c.observed_fractions.has_value());
  CHECK(c.observed_fractions->low == 0.6);
}

TEST_CASE("dates with no finite lake cell are dropped") {
  auto series = fixture::ndci_ten_day_series();
  for (auto& v : series.images[4].data()) v = std::nanf("");
  const auto idx = series_mean_index(series, IndexKind::kNdci);
  CHECK(idx.dates.size() == 9);
  REQUIRE(idx.dropped_dates.size() == 1);
  CHECK(idx.dropped_dates[0] == series.images[4].date());
  auto other = series_mean_index(fixture::ndci_ten_day_series(), IndexKind::kNdci);
  try {
    compare_series(idx, other);
    FAIL("expected DateMismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kDateMismatch);
  }
  series.region = LakeRegion(8, 8);
  try {
    series_mean_index(series, IndexKind::kNdci);
    FAIL("expected EmptyRegion");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kEmptyRegion);
  }
}
