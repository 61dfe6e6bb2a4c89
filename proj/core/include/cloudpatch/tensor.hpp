#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cloudpatch/error.hpp"

namespace cloudpatch {

struct Shape4 {
  std::size_t n = 1, h = 1, w = 1, c = 1;

  std::size_t size() const noexcept { return n * h * w * c; }
  // Elements per batch entry.
  std::size_t item() const noexcept { return h * w * c; }
  bool operator==(const Shape4&) const = default;
  std::string str() const;
};

// Dense N x H x W x C array (NHWC, row-major).
template <class T>
class Tensor4 {
 public:
  using value_type = T;

  Tensor4() = default;
  explicit Tensor4(Shape4 shape, T fill = T{}) : shape_(shape) {
    check(shape);
    values_.assign(shape.size(), fill);
  }
  Tensor4(Shape4 shape, std::vector<T> values) : shape_(shape), values_(std::move(values)) {
    check(shape);
    if (values_.size() != shape.size()) {
      throw Error(ErrorKind::kShapeMismatch, "value count does not match " + shape.str());
    }
  }

  const Shape4& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return values_.size(); }

  std::size_t index(std::size_t n, std::size_t i, std::size_t j, std::size_t k) const noexcept {
    return ((n * shape_.h + i) * shape_.w + j) * shape_.c + k;
  }
  T& at(std::size_t n, std::size_t i, std::size_t j, std::size_t k) noexcept {
    return values_[index(n, i, j, k)];
  }
  const T& at(std::size_t n, std::size_t i, std::size_t j, std::size_t k) const noexcept {
    return values_[index(n, i, j, k)];
  }
  T& operator[](std::size_t flat) noexcept { return values_[flat]; }
  const T& operator[](std::size_t flat) const noexcept { return values_[flat]; }

  T* data() noexcept { return values_.data(); }
  const T* data() const noexcept { return values_.data(); }
  std::span<T> values() noexcept { return values_; }
  std::span<const T> values() const noexcept { return values_; }

  // Same values under a new shape of equal size.
  Tensor4 reshaped(Shape4 shape) const& { return Tensor4(shape, values_); }
  Tensor4 reshaped(Shape4 shape) && { return Tensor4(shape, std::move(values_)); }

  template <class U>
  Tensor4<U> cast() const {
    return Tensor4<U>(shape_, std::vector<U>(values_.begin(), values_.end()));
  }

  bool operator==(const Tensor4&) const = default;

 private:
  static void check(const Shape4& s) {
    if (s.n == 0 || s.h == 0 || s.w == 0 || s.c == 0) {
      throw Error(ErrorKind::kShapeMismatch, "tensor dimensions must be >= 1, got " + s.str());
    }
  }

  Shape4 shape_;
  std::vector<T> values_;
};

// 1 = position contributes to the loss.
using MaskTensor = Tensor4<std::uint8_t>;

enum class LayerKind { kConv2d, kDense, kLstm };

std::string_view to_string(LayerKind kind);

template <class T>
struct Blob {
  std::vector<std::size_t> shape;
  std::vector<T> values;

  std::size_t size() const noexcept { return values.size(); }
  bool empty() const noexcept { return values.empty(); }
  bool operator==(const Blob&) const = default;
};

// Trainable parameters of one layer.
//   conv2d: weight (3,3,C_in,C_out), bias (C_out)
//   dense:  weight (in,out), bias (out)
//   lstm:   weight (in,4u), recurrent (u,4u), bias (4u); gate order i,f,g,o
template <class T>
struct LayerParams {
  std::string name;
  LayerKind kind = LayerKind::kConv2d;
  Blob<T> weight;
  Blob<T> recurrent;
  Blob<T> bias;

  std::size_t count() const noexcept { return weight.size() + recurrent.size() + bias.size(); }

  template <class F>
  void for_each_blob(F&& f) {
    f("weight", weight);
    if (kind == LayerKind::kLstm) f("recurrent", recurrent);
    f("bias", bias);
  }
  template <class F>
  void for_each_blob(F&& f) const {
    f("weight", weight);
    if (kind == LayerKind::kLstm) f("recurrent", recurrent);
    f("bias", bias);
  }

  LayerParams zeros_like() const;
  template <class U>
  LayerParams<U> cast() const;

  bool operator==(const LayerParams&) const = default;
};

// Ordered collection of layer parameters.
template <class T>
struct ParamSet {
  std::vector<LayerParams<T>> layers;

  std::size_t count() const noexcept;
  const LayerParams<T>& at(std::string_view name) const;
  LayerParams<T>& at(std::string_view name);
  ParamSet zeros_like() const;
  template <class U>
  ParamSet<U> cast() const;
  bool all_finite() const;

  bool operator==(const ParamSet&) const = default;
};

// Seeded initializers.
template <class T>
LayerParams<T> make_conv_layer(std::string name, std::size_t in_channels,
                               std::size_t out_channels, std::mt19937_64& rng);
template <class T>
LayerParams<T> make_dense_layer(std::string name, std::size_t in_dim, std::size_t out_dim,
                                std::mt19937_64& rng);
// Forget-gate bias starts at 1, the other gate biases at 0.
template <class T>
LayerParams<T> make_lstm_layer(std::string name, std::size_t in_dim, std::size_t units,
                               std::mt19937_64& rng);

// ---- implementation of the small templates ----

template <class T>
LayerParams<T> LayerParams<T>::zeros_like() const {
  LayerParams out = *this;
  out.for_each_blob([](std::string_view, Blob<T>& b) { std::fill(b.values.begin(), b.values.end(), T{}); });
  return out;
}

template <class T>
template <class U>
LayerParams<U> LayerParams<T>::cast() const {
  const auto conv = [](const Blob<T>& b) {
    return Blob<U>{b.shape, std::vector<U>(b.values.begin(), b.values.end())};
  };
  return LayerParams<U>{name, kind, conv(weight), conv(recurrent), conv(bias)};
}

template <class T>
std::size_t ParamSet<T>::count() const noexcept {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.count();
  return n;
}

template <class T>
const LayerParams<T>& ParamSet<T>::at(std::string_view name) const {
  for (const auto& l : layers) {
    if (l.name == name) return l;
  }
  throw Error(ErrorKind::kShapeMismatch, "no layer named " + std::string(name));
}

template <class T>
LayerParams<T>& ParamSet<T>::at(std::string_view name) {
  for (auto& l : layers) {
    if (l.name == name) return l;
  }
  throw Error(ErrorKind::kShapeMismatch, "no layer named " + std::string(name));
}

template <class T>
ParamSet<T> ParamSet<T>::zeros_like() const {
  ParamSet out;
  out.layers.reserve(layers.size());
  for (const auto& l : layers) out.layers.push_back(l.zeros_like());
  return out;
}

template <class T>
template <class U>
ParamSet<U> ParamSet<T>::cast() const {
  ParamSet<U> out;
  for (const auto& l : layers) out.layers.push_back(l.template cast<U>());
  return out;
}

template <class T>
bool ParamSet<T>::all_finite() const {
  bool ok = true;
  for (const auto& l : layers) {
    l.for_each_blob([&](std::string_view, const Blob<T>& b) {
      for (T v : b.values) ok = ok && std::isfinite(static_cast<double>(v));
    });
  }
  return ok;
}

}  // namespace cloudpatch
