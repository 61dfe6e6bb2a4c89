#pragma once

// Independent reference implementations the unit and acceptance tests compare
// against. Nothing here calls into the library's numerics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "cloudpatch/raster.hpp"
#include "cloudpatch/tensor.hpp"

namespace oracle {

using cloudpatch::MaskTensor;
using cloudpatch::Tensor4;

// Loop over every position; NaN targets and vm = 0 positions are skipped.
inline double masked_mse(const Tensor4<double>& y_true, const Tensor4<double>& y_pred,
                         const MaskTensor& vm, std::size_t* count = nullptr) {
  const auto& s = y_true.shape();
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t b = 0; b < s.n; ++b) {
    for (std::size_t i = 0; i < s.h; ++i) {
      for (std::size_t j = 0; j < s.w; ++j) {
        for (std::size_t c = 0; c < s.c; ++c) {
          const double t = y_true.at(b, i, j, c);
          if (!vm.at(b, i, j, c) || std::isnan(t)) continue;
          const double d = t - y_pred.at(b, i, j, c);
          sum += d * d;
          ++n;
        }
      }
    }
  }
  if (count) *count = n;
  return n == 0 ? std::nan("") : sum / static_cast<double>(n);
}

// Masks the k smallest values by sorting (value, index) pairs.
inline std::vector<std::uint8_t> sort_threshold(const std::vector<double>& values, double ratio) {
  const auto k = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(values.size())));
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return values[a] < values[b] || (values[a] == values[b] && a < b);
  });
  std::vector<std::uint8_t> mask(values.size(), 0);
  for (std::size_t i = 0; i < k; ++i) mask[order[i]] = 1;
  return mask;
}

// Per-band RMSE over masked finite cells, accumulated cell by cell.
inline double rmse(const cloudpatch::MultibandImage& y, const cloudpatch::MultibandImage& yhat,
                   const cloudpatch::CloudMask& mask, std::size_t band) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < y.height(); ++i) {
    for (std::size_t j = 0; j < y.width(); ++j) {
      if (!mask.at(i, j) || std::isnan(y.at(i, j, band))) continue;
      const double d = static_cast<double>(y.at(i, j, band)) - yhat.at(i, j, band);
      sum += d * d;
      ++n;
    }
  }
  return std::sqrt(sum / static_cast<double>(n));
}

// Two-pass product-moment correlation.
inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

// |a - n| / max(|a|, |n|, floor). The floor keeps exact zeros from dividing
// by zero; it sits well above the finite-difference noise of h = 1e-5.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// Central differences of a scalar function over the entries of `x`, which is
// perturbed in place and restored. Returns the max relative error against
// `analytic`.
inline double check_gradient(std::span<double> x, std::span<const double> analytic,
                             const std::function<double()>& f, double h = 1e-5) {
  double worst = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double saved = x[k];
    x[k] = saved + h;
    const double up = f();
    x[k] = saved - h;
    const double down = f();
    x[k] = saved;
    worst = std::max(worst, relative_error(analytic[k], (up - down) / (2.0 * h)));
  }
  return worst;
}

inline std::vector<double> normal_values(std::size_t n, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> d(0.0, sd);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

// Values at least `gap` apart, in random order. Keeps max-pooling and ReLU
// away from their kinks under finite-difference perturbation.
inline std::vector<double> separated_values(std::size_t n, std::mt19937_64& rng, double gap = 0.01) {
  std::vector<double> v(n);
  std::uniform_real_distribution<double> jitter(0.0, gap * 0.4);
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = (static_cast<double>(i) - static_cast<double>(n) / 2.0) * gap + gap * 0.3 + jitter(rng);
  }
  std::shuffle(v.begin(), v.end(), rng);
  return v;
}

inline Tensor4<double> tensor(cloudpatch::Shape4 s, std::vector<double> values) {
  return Tensor4<double>(s, std::move(values));
}

// Weighted sum used to turn a tensor output into a scalar loss.
inline double dot(const Tensor4<double>& a, const std::vector<double>& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * w[i];
  return s;
}

}  // namespace oracle
