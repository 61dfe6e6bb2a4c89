#include "png_chart.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <map>
#include <memory>

#include <png.h>

namespace cloudpatch::cli {

namespace {

constexpr int kWidth = 800;
constexpr int kHeight = 400;
constexpr int kMargin = 30;

using Rgb = std::array<std::uint8_t, 3>;

constexpr std::array<Rgb, 6> kPalette{{{31, 119, 180}, {255, 127, 14}, {44, 160, 44},
                                       {214, 39, 40}, {148, 103, 189}, {140, 86, 75}}};

struct Canvas {
  std::vector<std::uint8_t> pixels = std::vector<std::uint8_t>(kWidth * kHeight * 3, 255);

  void fill(int x0, int y0, int x1, int y1, Rgb c) {
    x0 = std::clamp(x0, 0, kWidth);
    x1 = std::clamp(x1, 0, kWidth);
    y0 = std::clamp(y0, 0, kHeight);
    y1 = std::clamp(y1, 0, kHeight);
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) std::copy(c.begin(), c.end(), &pixels[(y * kWidth + x) * 3]);
    }
  }
};

void save_png(const Canvas& canvas, const std::filesystem::path& path) {
  std::unique_ptr<FILE, int (*)(FILE*)> file(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!file) throw Error(ErrorKind::kIoFailure, "cannot write '" + path.string() + "'");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error(ErrorKind::kIoFailure, "libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorKind::kIoFailure, "libpng failed writing '" + path.string() + "'");
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, kWidth, kHeight, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < kHeight; ++y) {
    png_write_row(png, const_cast<png_bytep>(&canvas.pixels[y * kWidth * 3]));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

void write_rmse_chart(const std::vector<ReportRow>& rows, const std::filesystem::path& path) {
  std::map<std::string, std::size_t> models;
  std::size_t max_band = 0;
  double top = 0.0;
  for (const auto& r : rows) {
    models.emplace(r.model, 0);
    max_band = std::max(max_band, r.band);
    top = std::max(top, r.rmse_mean + r.rmse_std);
  }
  std::size_t next = 0;
  for (auto& [name, slot] : models) slot = next++;

  Canvas canvas;
  const Rgb axis{0, 0, 0};
  canvas.fill(kMargin, kHeight - kMargin, kWidth - kMargin, kHeight - kMargin + 2, axis);
  canvas.fill(kMargin - 2, kMargin, kMargin, kHeight - kMargin, axis);
  if (rows.empty() || max_band == 0 || !(top > 0.0)) {
    save_png(canvas, path);
    return;
  }

  const double plot_h = kHeight - 2.0 * kMargin;
  const double group_w = (kWidth - 2.0 * kMargin) / static_cast<double>(max_band);
  const double bar_w = group_w * 0.8 / static_cast<double>(models.size());
  const auto y_of = [&](double v) { return kHeight - kMargin - static_cast<int>(v / top * plot_h); };
  for (const auto& r : rows) {
    if (r.band == 0) continue;
    const std::size_t m = models[r.model];
    const double x = kMargin + group_w * static_cast<double>(r.band - 1) + group_w * 0.1 +
                     bar_w * static_cast<double>(m);
    const int x0 = static_cast<int>(x), x1 = static_cast<int>(x + bar_w) - 1;
    canvas.fill(x0, y_of(r.rmse_mean), x1, kHeight - kMargin, kPalette[m % kPalette.size()]);
    if (r.rmse_std > 0.0) {
      const int xc = (x0 + x1) / 2;
      canvas.fill(xc, y_of(r.rmse_mean + r.rmse_std), xc + 1,
                  y_of(std::max(0.0, r.rmse_mean - r.rmse_std)) + 1, axis);
    }
  }
  save_png(canvas, path);
}

}  // namespace cloudpatch::cli
