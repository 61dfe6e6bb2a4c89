#include "cloudpatch/maskgen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <random>
#include <tuple>

#include <Eigen/Cholesky>
#include <Eigen/Core>

namespace cloudpatch {

namespace {

using FactorKey = std::tuple<std::size_t, std::size_t, double, double>;

// Lower Cholesky factor of the lattice covariance. Factorizing a 4096-point
// lattice takes about a second, so factors are memoized per process.
std::shared_ptr<const Eigen::MatrixXd> lattice_factor(std::size_t rows, std::size_t cols,
                                                      double sigma2, double range) {
  static std::mutex mutex;
  static std::map<FactorKey, std::shared_ptr<const Eigen::MatrixXd>> cache;

  const FactorKey key{rows, cols, sigma2, range};
  {
    std::lock_guard lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }

  const Eigen::Index n = static_cast<Eigen::Index>(rows * cols);
  Eigen::MatrixXd cov(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    const double ya = (static_cast<double>(a / cols) + 0.5) / static_cast<double>(rows);
    const double xa = (static_cast<double>(a % cols) + 0.5) / static_cast<double>(cols);
    for (Eigen::Index b = 0; b <= a; ++b) {
      const double yb = (static_cast<double>(b / cols) + 0.5) / static_cast<double>(rows);
      const double xb = (static_cast<double>(b % cols) + 0.5) / static_cast<double>(cols);
      const double dist = std::hypot(ya - yb, xa - xb);
      cov(a, b) = sigma2 * std::exp(-dist / range);
    }
  }
  cov.diagonal().array() += 1e-10 * sigma2;

  Eigen::LLT<Eigen::MatrixXd, Eigen::Lower> llt;
  llt.compute(cov.selfadjointView<Eigen::Lower>());
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorKind::kDegenerateGrid, "covariance matrix is not positive definite");
  }
  auto factor = std::make_shared<const Eigen::MatrixXd>(
      llt.matrixL().toDenseMatrix());

  std::lock_guard lock(mutex);
  if (cache.size() >= 4) cache.clear();
  cache.emplace(key, factor);
  return factor;
}

}  // namespace

void GrfConfig::validate() const {
  if (!(variance_sigma2 > 0.0)) throw Error(ErrorKind::kBadConfig, "variance must be > 0");
  if (!(range_d > 0.0 && range_d <= 2.0)) throw Error(ErrorKind::kBadConfig, "range must be in (0, 2]");
  if (!(mask_ratio > 0.0 && mask_ratio < 1.0)) {
    throw Error(ErrorKind::kBadConfig, "mask ratio must be in (0, 1)");
  }
  if (max_coarse < 2) throw Error(ErrorKind::kBadConfig, "coarse lattice must be at least 2");
}

ScalarField sample_grf(std::size_t height, std::size_t width, const GrfConfig& cfg) {
  if (height < 2 || width < 2) {
    throw Error(ErrorKind::kDegenerateGrid, "field needs at least 2x2 pixels");
  }
  if (!(cfg.variance_sigma2 > 0.0) || !(cfg.range_d > 0.0) || cfg.max_coarse < 2) {
    throw Error(ErrorKind::kBadConfig, "invalid random field parameters");
  }
  const std::size_t rows = std::min(height, cfg.max_coarse);
  const std::size_t cols = std::min(width, cfg.max_coarse);
  const auto factor = lattice_factor(rows, cols, cfg.variance_sigma2, cfg.range_d);

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(static_cast<Eigen::Index>(rows * cols));
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal(rng);
  const Eigen::VectorXd lattice = factor->triangularView<Eigen::Lower>() * z;

  ScalarField field{height, width, std::vector<double>(height * width)};
  if (rows == height && cols == width) {
    std::copy(lattice.data(), lattice.data() + lattice.size(), field.values.begin());
    return field;
  }

  // Bilinear resampling from lattice centres to pixel centres, clamped at the
  // border.
  const auto coord = [](std::size_t i, std::size_t fine, std::size_t coarse) {
    const double u = (static_cast<double>(i) + 0.5) / static_cast<double>(fine);
    const double a = std::clamp(u * static_cast<double>(coarse) - 0.5, 0.0,
                                static_cast<double>(coarse - 1));
    const std::size_t lo = std::min(static_cast<std::size_t>(a), coarse - 2);
    return std::pair{lo, a - static_cast<double>(lo)};
  };
  for (std::size_t i = 0; i < height; ++i) {
    const auto [r0, fr] = coord(i, height, rows);
    for (std::size_t j = 0; j < width; ++j) {
      const auto [c0, fc] = coord(j, width, cols);
      const auto lat = [&](std::size_t r, std::size_t c) {
        return lattice[static_cast<Eigen::Index>(r * cols + c)];
      };
      const double top = (1.0 - fc) * lat(r0, c0) + fc * lat(r0, c0 + 1);
      const double bottom = (1.0 - fc) * lat(r0 + 1, c0) + fc * lat(r0 + 1, c0 + 1);
      field.values[i * width + j] = (1.0 - fr) * top + fr * bottom;
    }
  }
  return field;
}

CloudMask threshold_mask(const ScalarField& field, double ratio) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw Error(ErrorKind::kBadConfig, "mask ratio must be in (0, 1)");
  const std::size_t n = field.height * field.width;
  if (n == 0 || field.values.size() != n) {
    throw Error(ErrorKind::kDegenerateField, "empty field");
  }
  const auto k = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  // The k-th smallest (value, index) pair is the threshold; nth_element on the
  // lexicographic key selects exactly the argmin set with row-major tie-break.
  const auto less = [&](std::size_t a, std::size_t b) {
    const double va = field.values[a];
    const double vb = field.values[b];
    return va < vb || (va == vb && a < b);
  };
  CloudMask mask(field.height, field.width);
  if (k == 0) return mask;
  std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k - 1), order.end(),
                   less);
  for (std::size_t i = 0; i < k; ++i) mask.set_flat(order[i], true);
  return mask;
}

MultibandImage apply_mask(const MultibandImage& target, const CloudMask& mask) {
  if (mask.height() != target.height() || mask.width() != target.width()) {
    throw Error(ErrorKind::kDimMismatch, "mask does not match image dimensions");
  }
  MultibandImage out = target;
  const float nan = std::numeric_limits<float>::quiet_NaN();
  const std::size_t bands = target.bands();
  for (std::size_t p = 0; p < target.pixels(); ++p) {
    if (!mask[p]) continue;
    for (std::size_t b = 0; b < bands; ++b) out.data()[p * bands + b] = nan;
  }
  return out;
}

CloudMask generate_mask(std::size_t height, std::size_t width, const GrfConfig& cfg) {
  cfg.validate();
  return threshold_mask(sample_grf(height, width, cfg), cfg.mask_ratio);
}

std::pair<ImageSeries, std::vector<CloudMask>> mask_series(const ImageSeries& series,
                                                           const GrfConfig& cfg) {
  if (series.images.empty()) throw Error(ErrorKind::kBadConfig, "series is empty");
  cfg.validate();
  ImageSeries masked;
  masked.region = series.region;
  masked.band_metadata = series.band_metadata;
  std::vector<CloudMask> masks;
  masks.reserve(series.images.size());
  for (std::size_t i = 0; i < series.images.size(); ++i) {
    GrfConfig draw = cfg;
    draw.seed = cfg.seed + i;
    const auto& img = series.images[i];
    masks.push_back(generate_mask(img.height(), img.width(), draw));
    masked.images.push_back(apply_mask(img, masks.back()));
  }
  return {std::move(masked), std::move(masks)};
}

}  // namespace cloudpatch
