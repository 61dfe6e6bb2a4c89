#pragma once

#include <cstdint>
#include <vector>

#include "cloudpatch/tensor.hpp"

namespace cloudpatch {

// Forward and backward passes. Every backward takes the tensors saved by its
// forward explicitly; no hidden state is kept between calls.

// 3x3 kernel, stride 1, zero ("same") padding.
template <class T>
Tensor4<T> conv2d(const Tensor4<T>& input, const LayerParams<T>& params);

template <class T>
struct LayerGrads {
  Tensor4<T> input;
  LayerParams<T> params;
};

template <class T>
LayerGrads<T> conv2d_backward(const Tensor4<T>& grad_out, const Tensor4<T>& saved_input,
                              const LayerParams<T>& params);

// 2x2 max pooling with stride 2. argmax holds flat input indices; ties go to
// the first cell of the window in row-major order.
template <class T>
struct PoolResult {
  Tensor4<T> output;
  std::vector<std::uint32_t> argmax;
};

template <class T>
PoolResult<T> maxpool2(const Tensor4<T>& input);
template <class T>
Tensor4<T> maxpool2_backward(const Tensor4<T>& grad_out, const std::vector<std::uint32_t>& argmax,
                             const Shape4& input_shape);

// Nearest-neighbour 2x upsampling.
template <class T>
Tensor4<T> upsample2(const Tensor4<T>& input);
template <class T>
Tensor4<T> upsample2_backward(const Tensor4<T>& grad_out);

// Treats each batch entry as a flat H*W*C vector. Output shape (N,1,1,out).
template <class T>
Tensor4<T> dense(const Tensor4<T>& input, const LayerParams<T>& params);
template <class T>
LayerGrads<T> dense_backward(const Tensor4<T>& grad_out, const Tensor4<T>& saved_input,
                             const LayerParams<T>& params);

enum class Activation { kRelu, kSigmoid, kTanh, kLinear };

template <class T>
Tensor4<T> activate(Activation kind, const Tensor4<T>& x);
// Needs the forward input (relu) or output (sigmoid, tanh). relu'(0) = 0.
template <class T>
Tensor4<T> activate_backward(Activation kind, const Tensor4<T>& grad_out, const Tensor4<T>& input,
                             const Tensor4<T>& output);

// Inverted dropout. scale is empty when the layer acted as identity.
template <class T>
struct DropoutResult {
  Tensor4<T> output;
  std::vector<T> scale;
};

template <class T>
DropoutResult<T> dropout(const Tensor4<T>& x, double rate, bool training, std::uint64_t seed);
template <class T>
Tensor4<T> dropout_backward(const Tensor4<T>& grad_out, const std::vector<T>& scale);

}  // namespace cloudpatch
