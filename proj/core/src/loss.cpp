#include "cloudpatch/loss.hpp"

#include <cmath>

namespace cloudpatch {

template <class T>
MaskedLoss<T> masked_mse(const Tensor4<T>& y_true, const Tensor4<T>& y_pred, const MaskTensor& vm) {
  if (y_true.shape() != y_pred.shape() || vm.shape() != y_true.shape()) {
    throw Error(ErrorKind::kShapeMismatch, "masked_mse operands differ in shape: " +
                                               y_true.shape().str() + " " + y_pred.shape().str() +
                                               " " + vm.shape().str());
  }
  MaskedLoss<T> r{0.0, Tensor4<T>(y_pred.shape()), 0};
  double sum = 0.0;
  for (std::size_t k = 0; k < y_true.size(); ++k) {
    if (vm[k] && std::isfinite(static_cast<double>(y_true[k]))) {
      const double diff = static_cast<double>(y_true[k]) - static_cast<double>(y_pred[k]);
      sum += diff * diff;
      ++r.count;
    }
  }
  if (r.count == 0) {
    throw Error(ErrorKind::kEmptyMask, "no masked position with a finite target");
  }
  const double denom = static_cast<double>(r.count);
  r.value = sum / denom;
  for (std::size_t k = 0; k < y_true.size(); ++k) {
    if (vm[k] && std::isfinite(static_cast<double>(y_true[k]))) {
      r.grad[k] = static_cast<T>(
          2.0 * (static_cast<double>(y_pred[k]) - static_cast<double>(y_true[k])) / denom);
    }
  }
  return r;
}

template MaskedLoss<float> masked_mse<float>(const Tensor4<float>&, const Tensor4<float>&,
                                             const MaskTensor&);
template MaskedLoss<double> masked_mse<double>(const Tensor4<double>&, const Tensor4<double>&,
                                               const MaskTensor&);

}  // namespace cloudpatch
