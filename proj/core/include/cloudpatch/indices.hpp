#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cloudpatch/raster.hpp"

namespace cloudpatch {

// Per-pixel index values; NaN where undefined or outside the lake.
struct IndexField {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;

  double at(std::size_t row, std::size_t col) const { return values[row * width + col]; }
};

enum class IndexKind { kGreenRed, kNdci };
// standard = (RedEdge - Red) / (RedEdge + Red); printed = its negation.
enum class NdciOrientation { kStandard, kPrinted };
enum class AlgalCategory { kLow, kModerateHigh, kBloomRisk };

std::string_view to_string(IndexKind kind);
std::string_view to_string(NdciOrientation orientation);
std::string_view to_string(AlgalCategory category);
IndexKind parse_index_kind(std::string_view name);
NdciOrientation parse_orientation(std::string_view name);

// 0-based positions of the bands the indices use.
inline constexpr std::size_t kGreenBand = 3;    // band 4, 565 nm
inline constexpr std::size_t kRedBand = 5;      // band 6, 665 nm
inline constexpr std::size_t kRedEdgeBand = 6;  // band 7, 705 nm

IndexField green_red(const MultibandImage& img, const LakeRegion& region);
IndexField ndci(const MultibandImage& img, const LakeRegion& region,
                NdciOrientation orientation = NdciOrientation::kStandard);

// < 0 low, [0, 0.1] moderate-to-high, > 0.1 bloom risk. NonFinite on NaN/Inf.
AlgalCategory classify_ndci(double value);

struct IndexSeries {
  IndexKind kind = IndexKind::kNdci;
  std::vector<std::string> dates;
  std::vector<double> mean_values;
  std::vector<std::optional<AlgalCategory>> categories;  // NDCI only
  std::vector<std::string> dropped_dates;                 // no finite in-region cell
};

IndexSeries series_mean_index(const ImageSeries& series, IndexKind kind,
                              NdciOrientation orientation = NdciOrientation::kStandard);

struct CategoryFractions {
  double low = 0.0;
  double moderate_high = 0.0;
  double bloom_risk = 0.0;
};

struct SeriesComparison {
  double pearson_r = 0.0;
  double rmse = 0.0;
  std::optional<CategoryFractions> observed_fractions;
  std::optional<CategoryFractions> imputed_fractions;
};

CategoryFractions category_fractions(const IndexSeries& series);

// Both series must cover the same dates.
SeriesComparison compare_series(const IndexSeries& observed, const IndexSeries& imputed);

}  // namespace cloudpatch
