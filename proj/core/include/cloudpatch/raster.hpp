#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cloudpatch/error.hpp"

namespace cloudpatch {

struct BandMetadata {
  int index = 0;  // 1-based
  std::string name;
  double center_wavelength_nm = 0.0;
  double bandwidth_nm = 0.0;
};

// The 8-band SuperDove set, coastal blue through NIR.
const std::vector<BandMetadata>& default_band_set();

inline constexpr std::size_t kDefaultBands = 8;

// One date's H x W x C reflectance raster; missing values are NaN.
// Storage is row-major (row, column, band).
class MultibandImage {
 public:
  MultibandImage() = default;
  MultibandImage(std::size_t height, std::size_t width, std::size_t bands,
                 float fill = 0.0f, std::string date = {});
  MultibandImage(std::size_t height, std::size_t width, std::size_t bands,
                 std::vector<float> data, std::string date = {});

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t bands() const noexcept { return bands_; }
  std::size_t pixels() const noexcept { return height_ * width_; }
  const std::string& date() const noexcept { return date_; }
  void set_date(std::string date) { date_ = std::move(date); }

  std::size_t index(std::size_t row, std::size_t col, std::size_t band) const noexcept {
    return (row * width_ + col) * bands_ + band;
  }
  float at(std::size_t row, std::size_t col, std::size_t band) const noexcept {
    return data_[index(row, col, band)];
  }
  float& at(std::size_t row, std::size_t col, std::size_t band) noexcept {
    return data_[index(row, col, band)];
  }

  std::span<const float> data() const noexcept { return data_; }
  std::span<float> data() noexcept { return data_; }

  bool same_shape(const MultibandImage& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_ && bands_ == other.bands_;
  }

  // Extracts one band as a row-major H x W plane.
  std::vector<float> band_plane(std::size_t band) const;
  void set_band_plane(std::size_t band, std::span<const float> plane);

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t bands_ = 0;
  std::vector<float> data_;
  std::string date_;
};

// Binary H x W raster. The tag keeps cloud masks and lake regions apart.
template <class Tag>
class BinaryRaster {
 public:
  BinaryRaster() = default;
  BinaryRaster(std::size_t height, std::size_t width, std::uint8_t fill = 0)
      : height_(height), width_(width), cells_(height * width, fill ? 1 : 0) {}

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return cells_.size(); }

  bool at(std::size_t row, std::size_t col) const noexcept {
    return cells_[row * width_ + col] != 0;
  }
  void set(std::size_t row, std::size_t col, bool value) noexcept {
    cells_[row * width_ + col] = value ? 1 : 0;
  }
  bool operator[](std::size_t flat) const noexcept { return cells_[flat] != 0; }
  void set_flat(std::size_t flat, bool value) noexcept { cells_[flat] = value ? 1 : 0; }

  std::size_t count() const noexcept {
    std::size_t n = 0;
    for (auto c : cells_) n += c;
    return n;
  }

  std::span<const std::uint8_t> cells() const noexcept { return cells_; }

  bool operator==(const BinaryRaster&) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<std::uint8_t> cells_;
};

struct CloudMaskTag {};
struct LakeRegionTag {};

// 1 = artificially masked (to impute).
using CloudMask = BinaryRaster<CloudMaskTag>;
// 1 = inside the lake.
using LakeRegion = BinaryRaster<LakeRegionTag>;

struct ImageSeries {
  std::vector<MultibandImage> images;
  LakeRegion region;
  std::vector<BandMetadata> band_metadata;

  // Throws BadDims / DimMismatch / BadConfig when the series invariants fail.
  void validate() const;
};

// MBR1 container I/O. See README for the byte layout.
MultibandImage read_raster(const std::filesystem::path& path);
void write_raster(const MultibandImage& image, const std::filesystem::path& path);

CloudMask read_cloud_mask(const std::filesystem::path& path);
LakeRegion read_region(const std::filesystem::path& path);
void write_mask(const CloudMask& mask, const std::filesystem::path& path);
void write_mask(const LakeRegion& region, const std::filesystem::path& path);

// Series manifest: a `region=<path>` header followed by `date,image,mask`
// lines. The mask column may be empty. Relative paths resolve against the
// manifest's directory.
struct ManifestEntry {
  std::string date;
  std::filesystem::path image;
  std::filesystem::path mask;
};

struct SeriesManifest {
  std::filesystem::path region;
  std::vector<ManifestEntry> entries;
};

SeriesManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const SeriesManifest& manifest, const std::filesystem::path& path);

struct LoadedSeries {
  ImageSeries series;
  // One entry per image; empty optional where the manifest lists no mask.
  std::vector<std::optional<CloudMask>> masks;
};

LoadedSeries load_series(const std::filesystem::path& manifest_path);

// Predicted values at masked cells, observed values elsewhere.
MultibandImage composite(const MultibandImage& observed, const MultibandImage& predicted,
                         const CloudMask& mask);

// Writes bytes to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::span<const char> bytes);

}  // namespace cloudpatch
