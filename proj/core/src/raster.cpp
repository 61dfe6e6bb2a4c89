#include "cloudpatch/raster.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace cloudpatch {

namespace fs = std::filesystem;

namespace {

constexpr char kRasterMagic[4] = {'M', 'B', 'R', '1'};
constexpr std::size_t kHeaderBytes = 16;

void check_image_dims(std::size_t height, std::size_t width, std::size_t bands) {
  if (height < 4 || width < 4 || height % 4 != 0 || width % 4 != 0) {
    throw Error(ErrorKind::kBadDims, "image dimensions " + std::to_string(height) + "x" +
                                         std::to_string(width) +
                                         " must be >= 4 and divisible by 4");
  }
  if (bands == 0) throw Error(ErrorKind::kBadDims, "image has zero bands");
}

void put_u32(char* dst, std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) v = __builtin_bswap32(v);
  std::memcpy(dst, &v, 4);
}

std::uint32_t get_u32(const char* p) {
  std::uint32_t v;
  std::memcpy(&v, p, 4);
  if constexpr (std::endian::native == std::endian::big) v = __builtin_bswap32(v);
  return v;
}

std::vector<char> read_all(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIoFailure, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct Container {
  std::uint32_t height, width, bands;
  std::vector<float> values;
};

Container decode_container(const std::vector<char>& bytes, const fs::path& path) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kRasterMagic, 4) != 0) {
    throw Error(ErrorKind::kBadMagic, path.string() + " is not an MBR1 file");
  }
  if (bytes.size() < kHeaderBytes) {
    throw Error(ErrorKind::kTruncatedFile, path.string() + ": header incomplete");
  }
  Container c{get_u32(&bytes[4]), get_u32(&bytes[8]), get_u32(&bytes[12]), {}};
  if (c.height == 0 || c.width == 0 || c.bands == 0) {
    throw Error(ErrorKind::kBadDims, path.string() + ": zero dimension");
  }
  try {
    check_image_dims(c.height, c.width, c.bands);
  } catch (const Error& e) {
    throw Error(ErrorKind::kBadDims, path.string() + ": " + e.what());
  }
  const std::size_t count = std::size_t{c.height} * c.width * c.bands;
  if (bytes.size() - kHeaderBytes < count * 4) {
    throw Error(ErrorKind::kTruncatedFile, path.string() + ": payload holds " +
                                               std::to_string((bytes.size() - kHeaderBytes) / 4) +
                                               " of " + std::to_string(count) + " values");
  }
  c.values.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    c.values[i] = std::bit_cast<float>(get_u32(&bytes[kHeaderBytes + 4 * i]));
  }
  return c;
}

std::vector<char> encode_container(std::size_t height, std::size_t width, std::size_t bands,
                                   std::span<const float> values) {
  std::vector<char> out(kHeaderBytes + values.size() * 4);
  std::memcpy(out.data(), kRasterMagic, 4);
  put_u32(&out[4], static_cast<std::uint32_t>(height));
  put_u32(&out[8], static_cast<std::uint32_t>(width));
  put_u32(&out[12], static_cast<std::uint32_t>(bands));
  for (std::size_t i = 0; i < values.size(); ++i) {
    put_u32(&out[kHeaderBytes + 4 * i], std::bit_cast<std::uint32_t>(values[i]));
  }
  return out;
}

template <class Tag>
BinaryRaster<Tag> read_binary(const fs::path& path) {
  const Container c = decode_container(read_all(path), path);
  if (c.bands != 1) {
    throw Error(ErrorKind::kBadDims, path.string() + ": mask must have exactly one band");
  }
  BinaryRaster<Tag> mask(c.height, c.width);
  for (std::size_t i = 0; i < c.values.size(); ++i) {
    const float v = c.values[i];
    if (v != 0.0f && v != 1.0f) {
      throw Error(ErrorKind::kBadConfig, path.string() + ": mask value outside {0,1}");
    }
    mask.set_flat(i, v == 1.0f);
  }
  return mask;
}

template <class Tag>
void write_binary(const BinaryRaster<Tag>& mask, const fs::path& path) {
  std::vector<float> values(mask.size());
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = mask[i] ? 1.0f : 0.0f;
  write_file_atomic(path, encode_container(mask.height(), mask.width(), 1, values));
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char ch) { return !std::isspace(ch); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

}  // namespace

const std::vector<BandMetadata>& default_band_set() {
  static const std::vector<BandMetadata> bands = {
      {1, "coastal_blue", 443.0, 20.0}, {2, "blue", 490.0, 50.0},
      {3, "green_i", 531.0, 36.0},      {4, "green", 565.0, 36.0},
      {5, "yellow", 610.0, 20.0},       {6, "red", 665.0, 31.0},
      {7, "red_edge", 705.0, 15.0},     {8, "nir", 865.0, 40.0},
  };
  return bands;
}

MultibandImage::MultibandImage(std::size_t height, std::size_t width, std::size_t bands,
                               float fill, std::string date)
    : height_(height), width_(width), bands_(bands), date_(std::move(date)) {
  check_image_dims(height, width, bands);
  data_.assign(height * width * bands, fill);
}

MultibandImage::MultibandImage(std::size_t height, std::size_t width, std::size_t bands,
                               std::vector<float> data, std::string date)
    : height_(height), width_(width), bands_(bands), data_(std::move(data)),
      date_(std::move(date)) {
  check_image_dims(height, width, bands);
  if (data_.size() != height * width * bands) {
    throw Error(ErrorKind::kDimMismatch, "data length does not match H*W*C");
  }
}

std::vector<float> MultibandImage::band_plane(std::size_t band) const {
  std::vector<float> plane(pixels());
  for (std::size_t p = 0; p < plane.size(); ++p) plane[p] = data_[p * bands_ + band];
  return plane;
}

void MultibandImage::set_band_plane(std::size_t band, std::span<const float> plane) {
  if (plane.size() != pixels()) throw Error(ErrorKind::kDimMismatch, "band plane size");
  for (std::size_t p = 0; p < plane.size(); ++p) data_[p * bands_ + band] = plane[p];
}

void ImageSeries::validate() const {
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto& img = images[i];
    if (i > 0) {
      if (!img.same_shape(images[0])) {
        throw Error(ErrorKind::kDimMismatch, "image " + img.date() + " differs in shape");
      }
      if (!(images[i - 1].date() < img.date())) {
        throw Error(ErrorKind::kBadConfig, "dates must be strictly increasing at " + img.date());
      }
    }
  }
  if (!images.empty() &&
      (region.height() != images[0].height() || region.width() != images[0].width())) {
    throw Error(ErrorKind::kDimMismatch, "region dimensions differ from the images");
  }
}

MultibandImage read_raster(const fs::path& path) {
  Container c = decode_container(read_all(path), path);
  if (c.height % 4 != 0 || c.width % 4 != 0 || c.height < 4 || c.width < 4) {
    throw Error(ErrorKind::kBadDims, path.string() + ": dimensions not divisible by 4");
  }
  return MultibandImage(c.height, c.width, c.bands, std::move(c.values));
}

void write_raster(const MultibandImage& image, const fs::path& path) {
  write_file_atomic(path,
                    encode_container(image.height(), image.width(), image.bands(), image.data()));
}

CloudMask read_cloud_mask(const fs::path& path) { return read_binary<CloudMaskTag>(path); }
LakeRegion read_region(const fs::path& path) { return read_binary<LakeRegionTag>(path); }
void write_mask(const CloudMask& mask, const fs::path& path) { write_binary(mask, path); }
void write_mask(const LakeRegion& region, const fs::path& path) { write_binary(region, path); }

void write_file_atomic(const fs::path& path, std::span<const char> bytes) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::kIoFailure, "cannot open " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorKind::kIoFailure, "write failed for " + tmp.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorKind::kIoFailure, "rename to " + path.string() + ": " + ec.message());
}

SeriesManifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIoFailure, "cannot open manifest " + path.string());
  SeriesManifest manifest;
  std::string line;
  int line_no = 0;
  bool have_region = false;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("region=", 0) == 0) {
      manifest.region = trim(line.substr(7));
      have_region = true;
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(trim(field));
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    if (fields.size() < 2 || fields.size() > 3) {
      throw Error(ErrorKind::kBadConfig, path.string() + ":" + std::to_string(line_no) +
                                             ": expected date,image_path,mask_path");
    }
    manifest.entries.push_back({fields[0], fields[1], fields.size() == 3 ? fields[2] : ""});
  }
  if (!have_region) {
    throw Error(ErrorKind::kBadConfig, path.string() + ": missing region= header line");
  }
  return manifest;
}

void write_manifest(const SeriesManifest& manifest, const fs::path& path) {
  std::string text = "region=" + manifest.region.generic_string() + "\n";
  for (const auto& e : manifest.entries) {
    text += e.date + "," + e.image.generic_string() + "," + e.mask.generic_string() + "\n";
  }
  write_file_atomic(path, text);
}

LoadedSeries load_series(const fs::path& manifest_path) {
  const SeriesManifest manifest = read_manifest(manifest_path);
  const fs::path base = manifest_path.parent_path();
  const auto resolve = [&](const fs::path& p) { return p.is_absolute() ? p : base / p; };

  LoadedSeries loaded;
  loaded.series.band_metadata = default_band_set();
  loaded.series.region = read_region(resolve(manifest.region));
  for (const auto& e : manifest.entries) {
    MultibandImage img = read_raster(resolve(e.image));
    img.set_date(e.date);
    loaded.series.images.push_back(std::move(img));
    if (e.mask.empty()) {
      loaded.masks.emplace_back();
    } else {
      CloudMask m = read_cloud_mask(resolve(e.mask));
      if (m.height() != loaded.series.images.back().height() ||
          m.width() != loaded.series.images.back().width()) {
        throw Error(ErrorKind::kDimMismatch, "mask for " + e.date + " differs in shape");
      }
      loaded.masks.emplace_back(std::move(m));
    }
  }
  if (!loaded.series.images.empty() &&
      loaded.series.images[0].bands() != loaded.series.band_metadata.size()) {
    loaded.series.band_metadata.resize(
        std::min(loaded.series.band_metadata.size(), loaded.series.images[0].bands()));
  }
  loaded.series.validate();
  return loaded;
}

MultibandImage composite(const MultibandImage& observed, const MultibandImage& predicted,
                         const CloudMask& mask) {
  if (!observed.same_shape(predicted) || mask.height() != observed.height() ||
      mask.width() != observed.width()) {
    throw Error(ErrorKind::kDimMismatch, "composite inputs differ in shape");
  }
  MultibandImage out = observed;
  const std::size_t bands = observed.bands();
  for (std::size_t p = 0; p < observed.pixels(); ++p) {
    if (!mask[p]) continue;
    for (std::size_t b = 0; b < bands; ++b) out.data()[p * bands + b] = predicted.data()[p * bands + b];
  }
  return out;
}

}  // namespace cloudpatch
