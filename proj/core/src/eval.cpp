#include "cloudpatch/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace cloudpatch {

namespace {

struct Pairs {
  std::vector<double> observed;
  std::vector<double> imputed;
};

void collect(const MultibandImage& observed, const MultibandImage& imputed, const CloudMask& mask,
             std::size_t band, Pairs& out) {
  if (!observed.same_shape(imputed) || mask.height() != observed.height() ||
      mask.width() != observed.width()) {
    throw Error(ErrorKind::kDimMismatch, "observed, imputed and mask differ in shape");
  }
  if (band >= observed.bands()) throw Error(ErrorKind::kDimMismatch, "band index out of range");
  const std::size_t bands = observed.bands();
  for (std::size_t p = 0; p < observed.pixels(); ++p) {
    if (!mask[p]) continue;
    const float y = observed.data()[p * bands + band];
    if (!std::isfinite(y)) continue;
    out.observed.push_back(y);
    out.imputed.push_back(imputed.data()[p * bands + band]);
  }
}

double parse_double(const std::string& text, const std::string& context) {
  double v = 0.0;
  const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
  if (r.ec != std::errc{} || r.ptr != text.data() + text.size()) {
    throw Error(ErrorKind::kBadConfig, context + ": '" + text + "' is not a number");
  }
  return v;
}

}  // namespace

double rmse_of(std::span<const double> observed, std::span<const double> predicted) {
  if (observed.size() != predicted.size()) throw Error(ErrorKind::kDimMismatch, "length mismatch");
  if (observed.empty()) throw Error(ErrorKind::kEmptyMask, "no cells to score");
  double sse = 0.0;
  for (std::size_t k = 0; k < observed.size(); ++k) {
    const double d = observed[k] - predicted[k];
    sse += d * d;
  }
  return std::sqrt(sse / static_cast<double>(observed.size()));
}

double pearson_of(std::span<const double> observed, std::span<const double> predicted) {
  if (observed.size() != predicted.size()) throw Error(ErrorKind::kDimMismatch, "length mismatch");
  if (observed.size() < 2) throw Error(ErrorKind::kEmptyMask, "need at least two cells");
  const double n = static_cast<double>(observed.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < observed.size(); ++k) {
    mx += observed[k];
    my += predicted[k];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < observed.size(); ++k) {
    const double dx = observed[k] - mx;
    const double dy = predicted[k] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) {
    throw Error(ErrorKind::kConstantSeries, "correlation undefined for a constant series");
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double rmse(const MultibandImage& observed, const MultibandImage& imputed, const CloudMask& mask,
            std::size_t band) {
  Pairs p;
  collect(observed, imputed, mask, band, p);
  return rmse_of(p.observed, p.imputed);
}

double pearson_r(const MultibandImage& observed, const MultibandImage& imputed,
                 const CloudMask& mask, std::size_t band) {
  Pairs p;
  collect(observed, imputed, mask, band, p);
  return pearson_of(p.observed, p.imputed);
}

std::vector<BandMetrics> evaluate_model(const std::vector<MultibandImage>& observed,
                                        const std::vector<MultibandImage>& imputed,
                                        const std::vector<CloudMask>& masks) {
  if (observed.size() != imputed.size() || observed.size() != masks.size()) {
    throw Error(ErrorKind::kDimMismatch, "observed, imputed and mask series differ in length");
  }
  if (observed.empty()) throw Error(ErrorKind::kEmptyMask, "no images to evaluate");
  const std::size_t bands = observed[0].bands();
  std::vector<BandMetrics> out;
  for (std::size_t b = 0; b < bands; ++b) {
    Pairs p;
    for (std::size_t i = 0; i < observed.size(); ++i) collect(observed[i], imputed[i], masks[i], b, p);
    out.push_back({b + 1, rmse_of(p.observed, p.imputed), pearson_of(p.observed, p.imputed),
                   p.observed.size()});
  }
  return out;
}

std::vector<ReportRow> summarize_runs(const std::string& model,
                                      const std::vector<std::vector<BandMetrics>>& runs) {
  std::vector<ReportRow> rows;
  if (runs.empty()) return rows;
  const std::size_t bands = runs[0].size();
  const double n = static_cast<double>(runs.size());
  for (std::size_t b = 0; b < bands; ++b) {
    double rm = 0.0, rr = 0.0;
    for (const auto& run : runs) {
      rm += run[b].rmse;
      rr += run[b].pearson_r;
    }
    rm /= n;
    rr /= n;
    double vm = 0.0, vr = 0.0;
    for (const auto& run : runs) {
      vm += (run[b].rmse - rm) * (run[b].rmse - rm);
      vr += (run[b].pearson_r - rr) * (run[b].pearson_r - rr);
    }
    const double denom = runs.size() > 1 ? n - 1.0 : 1.0;
    rows.push_back({model, runs[0][b].band, rm, std::sqrt(vm / denom), rr, std::sqrt(vr / denom),
                    runs.size()});
  }
  return rows;
}

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general, 6);
  return std::string(buf, r.ptr);
}

void write_report(std::vector<ReportRow> rows, const std::filesystem::path& path) {
  if (rows.empty()) throw Error(ErrorKind::kBadConfig, "report has no rows");
  std::stable_sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
    return a.model != b.model ? a.model < b.model : a.band < b.band;
  });
  std::string text = "model,band,rmse_mean,rmse_std,r_mean,r_std,n_runs\n";
  for (const auto& r : rows) {
    text += r.model + "," + std::to_string(r.band) + "," + format_number(r.rmse_mean) + "," +
            format_number(r.rmse_std) + "," + format_number(r.r_mean) + "," +
            format_number(r.r_std) + "," + std::to_string(r.n_runs) + "\n";
  }
  write_file_atomic(path, text);
}

std::vector<ReportRow> read_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIoFailure, "cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "model,band,rmse_mean,rmse_std,r_mean,r_std,n_runs") {
    throw Error(ErrorKind::kBadConfig, path.string() + ": unexpected report header");
  }
  std::vector<ReportRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    const std::string ctx = path.string() + ":" + std::to_string(line_no);
    if (f.size() != 7) throw Error(ErrorKind::kBadConfig, ctx + ": expected 7 columns");
    rows.push_back({f[0], static_cast<std::size_t>(parse_double(f[1], ctx)), parse_double(f[2], ctx),
                    parse_double(f[3], ctx), parse_double(f[4], ctx), parse_double(f[5], ctx),
                    static_cast<std::size_t>(parse_double(f[6], ctx))});
  }
  return rows;
}

}  // namespace cloudpatch
