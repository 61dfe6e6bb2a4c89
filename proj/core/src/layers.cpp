#include "cloudpatch/layers.hpp"

#include <cmath>
#include <random>

#include <Eigen/Core>

#include "detail/column_sums.hpp"

namespace cloudpatch {

namespace {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MapMat = Eigen::Map<RowMat<T>>;
template <class T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;
template <class T>
using ConstMapRow = Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>;

Eigen::Index idx(std::size_t v) { return static_cast<Eigen::Index>(v); }

template <class T>
void check_conv(const Shape4& in, const LayerParams<T>& p) {
  const auto& ws = p.weight.shape;
  if (p.kind != LayerKind::kConv2d || ws.size() != 4 || ws[0] != 3 || ws[1] != 3 ||
      ws[2] != in.c || p.bias.size() != ws[3] || p.weight.size() != 9 * ws[2] * ws[3]) {
    throw Error(ErrorKind::kShapeMismatch,
                "conv2d layer '" + p.name + "' does not accept input " + in.str());
  }
}

// Row p = (i, j) of the output grid, column (ki, kj, c) of the 3x3xC window.
template <class T>
void im2col(const Tensor4<T>& input, std::size_t n, RowMat<T>& cols) {
  const auto& s = input.shape();
  const std::size_t row_len = 9 * s.c;
  cols.resize(idx(s.h * s.w), idx(row_len));
  T* out = cols.data();
  for (std::size_t i = 0; i < s.h; ++i) {
    for (std::size_t j = 0; j < s.w; ++j) {
      T* row = out + (i * s.w + j) * row_len;
      for (std::size_t ki = 0; ki < 3; ++ki) {
        const auto ii = static_cast<std::ptrdiff_t>(i + ki) - 1;
        for (std::size_t kj = 0; kj < 3; ++kj) {
          const auto jj = static_cast<std::ptrdiff_t>(j + kj) - 1;
          T* dst = row + (ki * 3 + kj) * s.c;
          if (ii < 0 || jj < 0 || ii >= static_cast<std::ptrdiff_t>(s.h) ||
              jj >= static_cast<std::ptrdiff_t>(s.w)) {
            std::fill(dst, dst + s.c, T{});
          } else {
            const T* src = input.data() + input.index(n, static_cast<std::size_t>(ii),
                                                      static_cast<std::size_t>(jj), 0);
            std::copy(src, src + s.c, dst);
          }
        }
      }
    }
  }
}

template <class T>
void col2im_add(const RowMat<T>& cols, std::size_t n, Tensor4<T>& grad_in) {
  const auto& s = grad_in.shape();
  const std::size_t row_len = 9 * s.c;
  const T* src_base = cols.data();
  for (std::size_t i = 0; i < s.h; ++i) {
    for (std::size_t j = 0; j < s.w; ++j) {
      const T* row = src_base + (i * s.w + j) * row_len;
      for (std::size_t ki = 0; ki < 3; ++ki) {
        const auto ii = static_cast<std::ptrdiff_t>(i + ki) - 1;
        if (ii < 0 || ii >= static_cast<std::ptrdiff_t>(s.h)) continue;
        for (std::size_t kj = 0; kj < 3; ++kj) {
          const auto jj = static_cast<std::ptrdiff_t>(j + kj) - 1;
          if (jj < 0 || jj >= static_cast<std::ptrdiff_t>(s.w)) continue;
          const T* src = row + (ki * 3 + kj) * s.c;
          T* dst = grad_in.data() + grad_in.index(n, static_cast<std::size_t>(ii),
                                                  static_cast<std::size_t>(jj), 0);
          for (std::size_t c = 0; c < s.c; ++c) dst[c] += src[c];
        }
      }
    }
  }
}

template <class T>
void check_dense(const Shape4& in, const LayerParams<T>& p) {
  const auto& ws = p.weight.shape;
  if (p.kind != LayerKind::kDense || ws.size() != 2 || ws[0] != in.item() ||
      p.bias.size() != ws[1] || p.weight.size() != ws[0] * ws[1]) {
    throw Error(ErrorKind::kShapeMismatch,
                "dense layer '" + p.name + "' does not accept input " + in.str());
  }
}

template <class T>
T sigmoid(T x) {
  if (x >= T{0}) return T{1} / (T{1} + std::exp(-x));
  const T e = std::exp(x);
  return e / (T{1} + e);
}

}  // namespace

template <class T>
Tensor4<T> conv2d(const Tensor4<T>& input, const LayerParams<T>& params) {
  const auto& s = input.shape();
  check_conv(s, params);
  const std::size_t out_c = params.weight.shape[3];
  Tensor4<T> out(Shape4{s.n, s.h, s.w, out_c});
  ConstMapMat<T> kernel(params.weight.values.data(), idx(9 * s.c), idx(out_c));
  ConstMapRow<T> bias(params.bias.values.data(), idx(out_c));
  RowMat<T> cols;
  for (std::size_t n = 0; n < s.n; ++n) {
    im2col(input, n, cols);
    MapMat<T> dst(out.data() + n * s.h * s.w * out_c, idx(s.h * s.w), idx(out_c));
    dst.noalias() = cols * kernel;
    dst.rowwise() += bias;
  }
  return out;
}

template <class T>
LayerGrads<T> conv2d_backward(const Tensor4<T>& grad_out, const Tensor4<T>& saved_input,
                              const LayerParams<T>& params) {
  const auto& s = saved_input.shape();
  check_conv(s, params);
  const std::size_t out_c = params.weight.shape[3];
  if (grad_out.shape() != Shape4{s.n, s.h, s.w, out_c}) {
    throw Error(ErrorKind::kShapeMismatch, "conv2d gradient shape " + grad_out.shape().str());
  }
  LayerGrads<T> g{Tensor4<T>(s), params.zeros_like()};
  ConstMapMat<T> kernel(params.weight.values.data(), idx(9 * s.c), idx(out_c));
  MapMat<T> grad_kernel(g.params.weight.values.data(), idx(9 * s.c), idx(out_c));
  RowMat<T> cols;
  RowMat<T> grad_cols;
  for (std::size_t n = 0; n < s.n; ++n) {
    ConstMapMat<T> go(grad_out.data() + n * s.h * s.w * out_c, idx(s.h * s.w), idx(out_c));
    im2col(saved_input, n, cols);
    grad_kernel.noalias() += cols.transpose() * go;
    detail::add_column_sums(go.data(), s.h * s.w, out_c, g.params.bias.values.data());
    grad_cols.noalias() = go * kernel.transpose();
    col2im_add(grad_cols, n, g.input);
  }
  return g;
}

template <class T>
PoolResult<T> maxpool2(const Tensor4<T>& input) {
  const auto& s = input.shape();
  if (s.h % 2 != 0 || s.w % 2 != 0) {
    throw Error(ErrorKind::kOddDims, "maxpool2 needs even spatial dims, got " + s.str());
  }
  PoolResult<T> r{Tensor4<T>(Shape4{s.n, s.h / 2, s.w / 2, s.c}), {}};
  r.argmax.resize(r.output.size());
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t i = 0; i < s.h / 2; ++i) {
      for (std::size_t j = 0; j < s.w / 2; ++j) {
        for (std::size_t c = 0; c < s.c; ++c) {
          std::size_t best = input.index(n, 2 * i, 2 * j, c);
          for (std::size_t di = 0; di < 2; ++di) {
            for (std::size_t dj = 0; dj < 2; ++dj) {
              const std::size_t k = input.index(n, 2 * i + di, 2 * j + dj, c);
              if (input[k] > input[best]) best = k;
            }
          }
          const std::size_t o = r.output.index(n, i, j, c);
          r.output[o] = input[best];
          r.argmax[o] = static_cast<std::uint32_t>(best);
        }
      }
    }
  }
  return r;
}

template <class T>
Tensor4<T> maxpool2_backward(const Tensor4<T>& grad_out, const std::vector<std::uint32_t>& argmax,
                             const Shape4& input_shape) {
  if (argmax.size() != grad_out.size() ||
      grad_out.shape() != Shape4{input_shape.n, input_shape.h / 2, input_shape.w / 2, input_shape.c}) {
    throw Error(ErrorKind::kShapeMismatch, "maxpool2 gradient shape " + grad_out.shape().str());
  }
  Tensor4<T> g(input_shape);
  for (std::size_t o = 0; o < argmax.size(); ++o) g[argmax[o]] += grad_out[o];
  return g;
}

template <class T>
Tensor4<T> upsample2(const Tensor4<T>& input) {
  const auto& s = input.shape();
  Tensor4<T> out(Shape4{s.n, 2 * s.h, 2 * s.w, s.c});
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t i = 0; i < 2 * s.h; ++i) {
      for (std::size_t j = 0; j < 2 * s.w; ++j) {
        const T* src = input.data() + input.index(n, i / 2, j / 2, 0);
        std::copy(src, src + s.c, out.data() + out.index(n, i, j, 0));
      }
    }
  }
  return out;
}

template <class T>
Tensor4<T> upsample2_backward(const Tensor4<T>& grad_out) {
  const auto& s = grad_out.shape();
  if (s.h % 2 != 0 || s.w % 2 != 0) {
    throw Error(ErrorKind::kOddDims, "upsample2 gradient must have even dims, got " + s.str());
  }
  Tensor4<T> g(Shape4{s.n, s.h / 2, s.w / 2, s.c});
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t i = 0; i < s.h; ++i) {
      for (std::size_t j = 0; j < s.w; ++j) {
        const T* src = grad_out.data() + grad_out.index(n, i, j, 0);
        T* dst = g.data() + g.index(n, i / 2, j / 2, 0);
        for (std::size_t c = 0; c < s.c; ++c) dst[c] += src[c];
      }
    }
  }
  return g;
}

template <class T>
Tensor4<T> dense(const Tensor4<T>& input, const LayerParams<T>& params) {
  const auto& s = input.shape();
  check_dense(s, params);
  const std::size_t out_dim = params.weight.shape[1];
  Tensor4<T> out(Shape4{s.n, 1, 1, out_dim});
  ConstMapMat<T> x(input.data(), idx(s.n), idx(s.item()));
  ConstMapMat<T> w(params.weight.values.data(), idx(s.item()), idx(out_dim));
  ConstMapRow<T> b(params.bias.values.data(), idx(out_dim));
  MapMat<T> y(out.data(), idx(s.n), idx(out_dim));
  y.noalias() = x * w;
  y.rowwise() += b;
  return out;
}

template <class T>
LayerGrads<T> dense_backward(const Tensor4<T>& grad_out, const Tensor4<T>& saved_input,
                             const LayerParams<T>& params) {
  const auto& s = saved_input.shape();
  check_dense(s, params);
  const std::size_t out_dim = params.weight.shape[1];
  if (grad_out.shape() != Shape4{s.n, 1, 1, out_dim}) {
    throw Error(ErrorKind::kShapeMismatch, "dense gradient shape " + grad_out.shape().str());
  }
  LayerGrads<T> g{Tensor4<T>(s), params.zeros_like()};
  ConstMapMat<T> x(saved_input.data(), idx(s.n), idx(s.item()));
  ConstMapMat<T> w(params.weight.values.data(), idx(s.item()), idx(out_dim));
  ConstMapMat<T> go(grad_out.data(), idx(s.n), idx(out_dim));
  MapMat<T>(g.params.weight.values.data(), idx(s.item()), idx(out_dim)).noalias() =
      x.transpose() * go;
  detail::add_column_sums(grad_out.data(), s.n, out_dim, g.params.bias.values.data());
  MapMat<T>(g.input.data(), idx(s.n), idx(s.item())).noalias() = go * w.transpose();
  return g;
}

template <class T>
Tensor4<T> activate(Activation kind, const Tensor4<T>& x) {
  Tensor4<T> y = x;
  switch (kind) {
    case Activation::kRelu:
      for (auto& v : y.values()) v = v > T{0} ? v : T{0};
      break;
    case Activation::kSigmoid:
      for (auto& v : y.values()) v = sigmoid(v);
      break;
    case Activation::kTanh:
      for (auto& v : y.values()) v = std::tanh(v);
      break;
    case Activation::kLinear:
      break;
  }
  return y;
}

template <class T>
Tensor4<T> activate_backward(Activation kind, const Tensor4<T>& grad_out, const Tensor4<T>& input,
                             const Tensor4<T>& output) {
  if (grad_out.shape() != input.shape() || grad_out.shape() != output.shape()) {
    throw Error(ErrorKind::kShapeMismatch, "activation gradient shape " + grad_out.shape().str());
  }
  Tensor4<T> g = grad_out;
  switch (kind) {
    case Activation::kRelu:
      for (std::size_t k = 0; k < g.size(); ++k) {
        if (!(input[k] > T{0})) g[k] = T{0};
      }
      break;
    case Activation::kSigmoid:
      for (std::size_t k = 0; k < g.size(); ++k) g[k] *= output[k] * (T{1} - output[k]);
      break;
    case Activation::kTanh:
      for (std::size_t k = 0; k < g.size(); ++k) g[k] *= T{1} - output[k] * output[k];
      break;
    case Activation::kLinear:
      break;
  }
  return g;
}

template <class T>
DropoutResult<T> dropout(const Tensor4<T>& x, double rate, bool training, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw Error(ErrorKind::kBadRate, "dropout rate must be in [0, 1)");
  }
  if (!training || rate == 0.0) return {x, {}};
  DropoutResult<T> r{x, std::vector<T>(x.size())};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  for (std::size_t k = 0; k < x.size(); ++k) {
    r.scale[k] = uniform(rng) >= rate ? keep_scale : T{0};
    r.output[k] *= r.scale[k];
  }
  return r;
}

template <class T>
Tensor4<T> dropout_backward(const Tensor4<T>& grad_out, const std::vector<T>& scale) {
  if (scale.empty()) return grad_out;
  if (scale.size() != grad_out.size()) {
    throw Error(ErrorKind::kShapeMismatch, "dropout gradient shape " + grad_out.shape().str());
  }
  Tensor4<T> g = grad_out;
  for (std::size_t k = 0; k < g.size(); ++k) g[k] *= scale[k];
  return g;
}

#define CLOUDPATCH_INSTANTIATE(T)                                                              \
  template Tensor4<T> conv2d<T>(const Tensor4<T>&, const LayerParams<T>&);                     \
  template LayerGrads<T> conv2d_backward<T>(const Tensor4<T>&, const Tensor4<T>&,              \
                                            const LayerParams<T>&);                            \
  template PoolResult<T> maxpool2<T>(const Tensor4<T>&);                                       \
  template Tensor4<T> maxpool2_backward<T>(const Tensor4<T>&, const std::vector<std::uint32_t>&, \
                                           const Shape4&);                                     \
  template Tensor4<T> upsample2<T>(const Tensor4<T>&);                                         \
  template Tensor4<T> upsample2_backward<T>(const Tensor4<T>&);                                \
  template Tensor4<T> dense<T>(const Tensor4<T>&, const LayerParams<T>&);                      \
  template LayerGrads<T> dense_backward<T>(const Tensor4<T>&, const Tensor4<T>&,               \
                                           const LayerParams<T>&);                             \
  template Tensor4<T> activate<T>(Activation, const Tensor4<T>&);                              \
  template Tensor4<T> activate_backward<T>(Activation, const Tensor4<T>&, const Tensor4<T>&,   \
                                           const Tensor4<T>&);                                 \
  template DropoutResult<T> dropout<T>(const Tensor4<T>&, double, bool, std::uint64_t);        \
  template Tensor4<T> dropout_backward<T>(const Tensor4<T>&, const std::vector<T>&);
CLOUDPATCH_INSTANTIATE(float)
CLOUDPATCH_INSTANTIATE(double)
#undef CLOUDPATCH_INSTANTIATE

}  // namespace cloudpatch
