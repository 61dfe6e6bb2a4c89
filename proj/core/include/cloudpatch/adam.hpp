#pragma once

#include <cstdint>

#include "cloudpatch/tensor.hpp"

namespace cloudpatch {

template <class T>
struct AdamState {
  std::uint64_t step_count = 0;
  ParamSet<T> first_moment;   // empty until the first step
  ParamSet<T> second_moment;
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// One bias-corrected Adam update of `params` in place.
template <class T>
void adam_step(ParamSet<T>& params, const ParamSet<T>& grads, AdamState<T>& state);

}  // namespace cloudpatch
