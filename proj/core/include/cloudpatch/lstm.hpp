#pragma once

#include <vector>

#include "cloudpatch/tensor.hpp"

namespace cloudpatch {

// Batched LSTM. Vectors are carried as (N,1,1,D) tensors.
//   i = sigmoid(x Wx_i + h Wh_i + b_i)   f, o likewise
//   g = tanh(x Wx_g + h Wh_g + b_g)
//   c' = f * c + i * g,  h' = o * tanh(c')

template <class T>
struct LstmStepCache {
  Tensor4<T> x;
  Tensor4<T> h_prev;
  Tensor4<T> c_prev;
  Tensor4<T> gates;  // post-activation, (N,1,1,4u) in i,f,g,o order
  Tensor4<T> tanh_c;
};

template <class T>
struct LstmStepResult {
  Tensor4<T> h;
  Tensor4<T> c;
  LstmStepCache<T> cache;
};

template <class T>
LstmStepResult<T> lstm_step(const Tensor4<T>& x, const Tensor4<T>& h_prev, const Tensor4<T>& c_prev,
                            const LayerParams<T>& params);

template <class T>
struct LstmStepGrads {
  Tensor4<T> x;
  Tensor4<T> h_prev;
  Tensor4<T> c_prev;
};

// Accumulates parameter gradients into `param_grads`.
template <class T>
LstmStepGrads<T> lstm_step_backward(const Tensor4<T>& grad_h, const Tensor4<T>& grad_c,
                                    const LstmStepCache<T>& cache, const LayerParams<T>& params,
                                    LayerParams<T>& param_grads);

template <class T>
struct LstmSequenceResult {
  std::vector<Tensor4<T>> hidden;  // one per step
  std::vector<LstmStepCache<T>> caches;
};

// Runs from a zero state and returns every hidden state.
template <class T>
LstmSequenceResult<T> lstm_sequence(const std::vector<Tensor4<T>>& inputs,
                                    const LayerParams<T>& params);

template <class T>
struct LstmSequenceGrads {
  std::vector<Tensor4<T>> inputs;
  LayerParams<T> params;
};

// Backpropagation through time given dLoss/dh_t for every step.
template <class T>
LstmSequenceGrads<T> lstm_sequence_backward(const std::vector<Tensor4<T>>& grad_hidden,
                                            const std::vector<LstmStepCache<T>>& caches,
                                            const LayerParams<T>& params);

}  // namespace cloudpatch
