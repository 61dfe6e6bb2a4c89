#include "cloudpatch/lstm.hpp"

#include <cmath>

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

Eigen::Index idx(std::size_t v) { return static_cast<Eigen::Index>(v); }

template <class T>
std::size_t check_lstm(const LayerParams<T>& p, const Shape4& x, const Shape4& h, const Shape4& c) {
  if (p.kind != LayerKind::kLstm || p.recurrent.shape.size() != 2 || p.weight.shape.size() != 2) {
    throw Error(ErrorKind::kShapeMismatch, "layer '" + p.name + "' is not an lstm");
  }
  const std::size_t units = p.recurrent.shape[0];
  const bool ok = p.recurrent.shape[1] == 4 * units && p.weight.shape[1] == 4 * units &&
                  p.bias.size() == 4 * units && p.weight.shape[0] == x.item() &&
                  h == Shape4{x.n, 1, 1, units} && c == Shape4{x.n, 1, 1, units};
  if (!ok) {
    throw Error(ErrorKind::kShapeMismatch,
                "lstm '" + p.name + "' does not accept input " + x.str() + " with state " + h.str());
  }
  return units;
}

template <class T>
T sigmoid(T x) {
  if (x >= T{0}) return T{1} / (T{1} + std::exp(-x));
  const T e = std::exp(x);
  return e / (T{1} + e);
}

}  // namespace

template <class T>
LstmStepResult<T> lstm_step(const Tensor4<T>& x, const Tensor4<T>& h_prev, const Tensor4<T>& c_prev,
                            const LayerParams<T>& params) {
  const std::size_t u = check_lstm(params, x.shape(), h_prev.shape(), c_prev.shape());
  const std::size_t n = x.shape().n;
  const std::size_t in = x.shape().item();

  LstmStepResult<T> r{Tensor4<T>(Shape4{n, 1, 1, u}), Tensor4<T>(Shape4{n, 1, 1, u}),
                      {x, h_prev, c_prev, Tensor4<T>(Shape4{n, 1, 1, 4 * u}),
                       Tensor4<T>(Shape4{n, 1, 1, u})}};
  MapMat<T> z(r.cache.gates.data(), idx(n), idx(4 * u));
  z.noalias() = ConstMapMat<T>(x.data(), idx(n), idx(in)) *
                ConstMapMat<T>(params.weight.values.data(), idx(in), idx(4 * u));
  z.noalias() += ConstMapMat<T>(h_prev.data(), idx(n), idx(u)) *
                 ConstMapMat<T>(params.recurrent.values.data(), idx(u), idx(4 * u));

  for (std::size_t b = 0; b < n; ++b) {
    T* g = r.cache.gates.data() + b * 4 * u;
    for (std::size_t k = 0; k < 4 * u; ++k) {
      const T pre = g[k] + params.bias.values[k];
      g[k] = (k >= 2 * u && k < 3 * u) ? std::tanh(pre) : sigmoid(pre);
    }
    for (std::size_t k = 0; k < u; ++k) {
      const T c = g[u + k] * c_prev[b * u + k] + g[k] * g[2 * u + k];
      const T tc = std::tanh(c);
      r.c[b * u + k] = c;
      r.cache.tanh_c[b * u + k] = tc;
      r.h[b * u + k] = g[3 * u + k] * tc;
    }
  }
  return r;
}

template <class T>
LstmStepGrads<T> lstm_step_backward(const Tensor4<T>& grad_h, const Tensor4<T>& grad_c,
                                    const LstmStepCache<T>& cache, const LayerParams<T>& params,
                                    LayerParams<T>& param_grads) {
  const std::size_t u =
      check_lstm(params, cache.x.shape(), cache.h_prev.shape(), cache.c_prev.shape());
  const std::size_t n = cache.x.shape().n;
  const std::size_t in = cache.x.shape().item();
  if (grad_h.shape() != cache.h_prev.shape() || grad_c.shape() != cache.c_prev.shape()) {
    throw Error(ErrorKind::kShapeMismatch, "lstm gradient shape " + grad_h.shape().str());
  }

  LstmStepGrads<T> g{Tensor4<T>(cache.x.shape()), Tensor4<T>(cache.h_prev.shape()),
                     Tensor4<T>(cache.c_prev.shape())};
  RowMat<T> dz(idx(n), idx(4 * u));
  for (std::size_t b = 0; b < n; ++b) {
    const T* gate = cache.gates.data() + b * 4 * u;
    for (std::size_t k = 0; k < u; ++k) {
      const T i = gate[k], f = gate[u + k], gg = gate[2 * u + k], o = gate[3 * u + k];
      const T tc = cache.tanh_c[b * u + k];
      const T dh = grad_h[b * u + k];
      const T dc = grad_c[b * u + k] + dh * o * (T{1} - tc * tc);
      dz(idx(b), idx(k)) = dc * gg * i * (T{1} - i);
      dz(idx(b), idx(u + k)) = dc * cache.c_prev[b * u + k] * f * (T{1} - f);
      dz(idx(b), idx(2 * u + k)) = dc * i * (T{1} - gg * gg);
      dz(idx(b), idx(3 * u + k)) = dh * tc * o * (T{1} - o);
      g.c_prev[b * u + k] = dc * f;
    }
  }

  ConstMapMat<T> wx(params.weight.values.data(), idx(in), idx(4 * u));
  ConstMapMat<T> wh(params.recurrent.values.data(), idx(u), idx(4 * u));
  MapMat<T>(param_grads.weight.values.data(), idx(in), idx(4 * u)).noalias() +=
      ConstMapMat<T>(cache.x.data(), idx(n), idx(in)).transpose() * dz;
  MapMat<T>(param_grads.recurrent.values.data(), idx(u), idx(4 * u)).noalias() +=
      ConstMapMat<T>(cache.h_prev.data(), idx(n), idx(u)).transpose() * dz;
  detail::add_column_sums(dz.data(), n, 4 * u, param_grads.bias.values.data());
  MapMat<T>(g.x.data(), idx(n), idx(in)).noalias() = dz * wx.transpose();
  MapMat<T>(g.h_prev.data(), idx(n), idx(u)).noalias() = dz * wh.transpose();
  return g;
}

template <class T>
LstmSequenceResult<T> lstm_sequence(const std::vector<Tensor4<T>>& inputs,
                                    const LayerParams<T>& params) {
  LstmSequenceResult<T> r;
  if (inputs.empty()) return r;
  if (params.recurrent.shape.size() != 2) {
    throw Error(ErrorKind::kShapeMismatch, "layer '" + params.name + "' is not an lstm");
  }
  const Shape4 state{inputs[0].shape().n, 1, 1, params.recurrent.shape[0]};
  Tensor4<T> h(state), c(state);
  for (const auto& x : inputs) {
    auto step = lstm_step(x, h, c, params);
    h = step.h;
    c = std::move(step.c);
    r.hidden.push_back(std::move(step.h));
    r.caches.push_back(std::move(step.cache));
  }
  return r;
}

template <class T>
LstmSequenceGrads<T> lstm_sequence_backward(const std::vector<Tensor4<T>>& grad_hidden,
                                            const std::vector<LstmStepCache<T>>& caches,
                                            const LayerParams<T>& params) {
  if (grad_hidden.size() != caches.size()) {
    throw Error(ErrorKind::kShapeMismatch, "lstm sequence gradient length mismatch");
  }
  LstmSequenceGrads<T> g{std::vector<Tensor4<T>>(caches.size()), params.zeros_like()};
  if (caches.empty()) return g;
  Tensor4<T> dh_next(caches.back().h_prev.shape());
  Tensor4<T> dc_next(caches.back().c_prev.shape());
  for (std::size_t t = caches.size(); t-- > 0;) {
    Tensor4<T> dh = grad_hidden[t];
    for (std::size_t k = 0; k < dh.size(); ++k) dh[k] += dh_next[k];
    auto step = lstm_step_backward(dh, dc_next, caches[t], params, g.params);
    g.inputs[t] = std::move(step.x);
    dh_next = std::move(step.h_prev);
    dc_next = std::move(step.c_prev);
  }
  return g;
}

#define CLOUDPATCH_INSTANTIATE(T)                                                              \
  template LstmStepResult<T> lstm_step<T>(const Tensor4<T>&, const Tensor4<T>&,                \
                                          const Tensor4<T>&, const LayerParams<T>&);           \
  template LstmStepGrads<T> lstm_step_backward<T>(const Tensor4<T>&, const Tensor4<T>&,        \
                                                  const LstmStepCache<T>&,                     \
                                                  const LayerParams<T>&, LayerParams<T>&);     \
  template LstmSequenceResult<T> lstm_sequence<T>(const std::vector<Tensor4<T>>&,              \
                                                  const LayerParams<T>&);                      \
  template LstmSequenceGrads<T> lstm_sequence_backward<T>(const std::vector<Tensor4<T>>&,      \
                                                          const std::vector<LstmStepCache<T>>&, \
                                                          const LayerParams<T>&);
CLOUDPATCH_INSTANTIATE(float)
CLOUDPATCH_INSTANTIATE(double)
#undef CLOUDPATCH_INSTANTIATE

}  // namespace cloudpatch
