#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cloudpatch/raster.hpp"

namespace cloudpatch {

struct BandMetrics {
  std::size_t band = 0;  // 1-based
  double rmse = 0.0;
  double pearson_r = 0.0;
  std::size_t n_pixels = 0;
};

// Plain-sample statistics. EmptyMask when empty; ConstantSeries when either
// side has zero variance.
double rmse_of(std::span<const double> observed, std::span<const double> predicted);
double pearson_of(std::span<const double> observed, std::span<const double> predicted);

// Metrics over masked cells of `band` (0-based) whose observation is finite.
double rmse(const MultibandImage& observed, const MultibandImage& imputed, const CloudMask& mask,
            std::size_t band);
double pearson_r(const MultibandImage& observed, const MultibandImage& imputed,
                 const CloudMask& mask, std::size_t band);

// Pools masked finite cells across all images, one entry per band.
std::vector<BandMetrics> evaluate_model(const std::vector<MultibandImage>& observed,
                                        const std::vector<MultibandImage>& imputed,
                                        const std::vector<CloudMask>& masks);

// One CSV row: model,band,rmse_mean,rmse_std,r_mean,r_std,n_runs
struct ReportRow {
  std::string model;
  std::size_t band = 0;
  double rmse_mean = 0.0;
  double rmse_std = 0.0;
  double r_mean = 0.0;
  double r_std = 0.0;
  std::size_t n_runs = 0;
};

// Mean and sample standard deviation (0 for a single run) per band.
std::vector<ReportRow> summarize_runs(const std::string& model,
                                      const std::vector<std::vector<BandMetrics>>& runs);

// Rows are sorted by model, then band. Numbers use 6 significant digits.
void write_report(std::vector<ReportRow> rows, const std::filesystem::path& path);
std::vector<ReportRow> read_report(const std::filesystem::path& path);

// 6 significant digits, "." decimal point regardless of locale.
std::string format_number(double value);

}  // namespace cloudpatch
