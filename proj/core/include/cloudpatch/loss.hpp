#pragma once

#include <cstddef>

#include "cloudpatch/tensor.hpp"

namespace cloudpatch {

template <class T>
struct MaskedLoss {
  double value = 0.0;
  Tensor4<T> grad;        // dLoss/dy_pred, zero outside contributing positions
  std::size_t count = 0;  // contributing positions
};

// Mean squared error over positions where vm = 1 and y_true is finite.
// Throws EmptyMask when no position contributes.
template <class T>
MaskedLoss<T> masked_mse(const Tensor4<T>& y_true, const Tensor4<T>& y_pred, const MaskTensor& vm);

}  // namespace cloudpatch
