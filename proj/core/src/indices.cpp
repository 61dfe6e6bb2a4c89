#include "cloudpatch/indices.hpp"

#include <cmath>
#include <limits>

#include "cloudpatch/eval.hpp"

namespace cloudpatch {

namespace {

constexpr double kMinDenominator = 1e-6;
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

template <class F>
IndexField map_region(const MultibandImage& img, const LakeRegion& region, F f) {
  if (region.height() != img.height() || region.width() != img.width()) {
    throw Error(ErrorKind::kDimMismatch, "region does not match image dimensions");
  }
  if (img.bands() <= kRedEdgeBand) {
    throw Error(ErrorKind::kDimMismatch, "index needs an 8-band image");
  }
  IndexField field{img.height(), img.width(), std::vector<double>(img.pixels(), kNan)};
  for (std::size_t i = 0; i < img.height(); ++i) {
    for (std::size_t j = 0; j < img.width(); ++j) {
      if (region.at(i, j)) field.values[i * img.width() + j] = f(i, j);
    }
  }
  return field;
}

}  // namespace

std::string_view to_string(IndexKind kind) {
  return kind == IndexKind::kNdci ? "ndci" : "green_red";
}

std::string_view to_string(NdciOrientation orientation) {
  return orientation == NdciOrientation::kStandard ? "standard" : "printed";
}

std::string_view to_string(AlgalCategory category) {
  switch (category) {
    case AlgalCategory::kLow: return "low";
    case AlgalCategory::kModerateHigh: return "moderate_high";
    case AlgalCategory::kBloomRisk: return "bloom_risk";
  }
  return "unknown";
}

IndexKind parse_index_kind(std::string_view name) {
  if (name == "ndci") return IndexKind::kNdci;
  if (name == "green_red") return IndexKind::kGreenRed;
  throw Error(ErrorKind::kBadConfig, "unknown index kind '" + std::string(name) + "'");
}

NdciOrientation parse_orientation(std::string_view name) {
  if (name == "standard") return NdciOrientation::kStandard;
  if (name == "printed") return NdciOrientation::kPrinted;
  throw Error(ErrorKind::kBadConfig, "unknown NDCI orientation '" + std::string(name) + "'");
}

IndexField green_red(const MultibandImage& img, const LakeRegion& region) {
  return map_region(img, region, [&](std::size_t i, std::size_t j) {
    const double green = img.at(i, j, kGreenBand);
    const double red = img.at(i, j, kRedBand);
    if (!std::isfinite(green) || !std::isfinite(red) || red < kMinDenominator) return kNan;
    return green / red;
  });
}

IndexField ndci(const MultibandImage& img, const LakeRegion& region, NdciOrientation orientation) {
  return map_region(img, region, [&](std::size_t i, std::size_t j) {
    const double red = img.at(i, j, kRedBand);
    const double red_edge = img.at(i, j, kRedEdgeBand);
    const double denom = red_edge + red;
    if (!std::isfinite(red) || !std::isfinite(red_edge) || denom < kMinDenominator) return kNan;
    const double standard = (red_edge - red) / denom;
    return orientation == NdciOrientation::kStandard ? standard : -standard;
  });
}

AlgalCategory classify_ndci(double value) {
  if (!std::isfinite(value)) throw Error(ErrorKind::kNonFinite, "cannot classify a non-finite NDCI");
  if (value < 0.0) return AlgalCategory::kLow;
  if (value <= 0.1) return AlgalCategory::kModerateHigh;
  return AlgalCategory::kBloomRisk;
}

IndexSeries series_mean_index(const ImageSeries& series, IndexKind kind,
                              NdciOrientation orientation) {
  if (series.images.empty()) throw Error(ErrorKind::kBadConfig, "series is empty");
  if (series.region.count() == 0) throw Error(ErrorKind::kEmptyRegion, "lake region is empty");
  IndexSeries out;
  out.kind = kind;
  for (const auto& img : series.images) {
    const IndexField field =
        kind == IndexKind::kNdci ? ndci(img, series.region, orientation) : green_red(img, series.region);
    double sum = 0.0;
    std::size_t n = 0;
    for (double v : field.values) {
      if (std::isfinite(v)) {
        sum += v;
        ++n;
      }
    }
    if (n == 0) {
      out.dropped_dates.push_back(img.date());
      continue;
    }
    const double mean = sum / static_cast<double>(n);
    out.dates.push_back(img.date());
    out.mean_values.push_back(mean);
    if (kind == IndexKind::kNdci) {
      out.categories.emplace_back(classify_ndci(mean));
    } else {
      out.categories.emplace_back();
    }
  }
  return out;
}

CategoryFractions category_fractions(const IndexSeries& series) {
  CategoryFractions f;
  std::size_t n = 0;
  for (const auto& c : series.categories) {
    if (!c) continue;
    ++n;
    switch (*c) {
      case AlgalCategory::kLow: f.low += 1.0; break;
      case AlgalCategory::kModerateHigh: f.moderate_high += 1.0; break;
      case AlgalCategory::kBloomRisk: f.bloom_risk += 1.0; break;
    }
  }
  if (n == 0) return f;
  const double total = static_cast<double>(n);
  f.low /= total;
  f.moderate_high /= total;
  f.bloom_risk /= total;
  return f;
}

SeriesComparison compare_series(const IndexSeries& observed, const IndexSeries& imputed) {
  if (observed.dates != imputed.dates) {
    throw Error(ErrorKind::kDateMismatch, "observed and imputed series cover different dates");
  }
  SeriesComparison c;
  c.pearson_r = pearson_of(observed.mean_values, imputed.mean_values);
  c.rmse = rmse_of(observed.mean_values, imputed.mean_values);
  if (observed.kind == IndexKind::kNdci) {
    c.observed_fractions = category_fractions(observed);
    c.imputed_fractions = category_fractions(imputed);
  }
  return c;
}

}  // namespace cloudpatch
