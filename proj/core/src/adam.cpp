#include "cloudpatch/adam.hpp"

#include <cmath>

namespace cloudpatch {

namespace {

template <class T>
bool same_layout(const ParamSet<T>& a, const ParamSet<T>& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    const auto& x = a.layers[l];
    const auto& y = b.layers[l];
    if (x.kind != y.kind || x.weight.shape != y.weight.shape || x.bias.shape != y.bias.shape ||
        x.recurrent.shape != y.recurrent.shape || x.count() != y.count()) {
      return false;
    }
  }
  return true;
}

template <class T>
void update_blob(Blob<T>& p, const Blob<T>& g, Blob<T>& m, Blob<T>& v, const AdamState<T>& s,
                 double bias1, double bias2) {
  for (std::size_t k = 0; k < p.values.size(); ++k) {
    const double grad = static_cast<double>(g.values[k]);
    const double mk = s.beta1 * static_cast<double>(m.values[k]) + (1.0 - s.beta1) * grad;
    const double vk = s.beta2 * static_cast<double>(v.values[k]) + (1.0 - s.beta2) * grad * grad;
    m.values[k] = static_cast<T>(mk);
    v.values[k] = static_cast<T>(vk);
    const double m_hat = mk / bias1;
    const double v_hat = vk / bias2;
    p.values[k] = static_cast<T>(static_cast<double>(p.values[k]) -
                                 s.lr * m_hat / (std::sqrt(v_hat) + s.epsilon));
  }
}

}  // namespace

template <class T>
void adam_step(ParamSet<T>& params, const ParamSet<T>& grads, AdamState<T>& state) {
  if (!same_layout(params, grads)) {
    throw Error(ErrorKind::kShapeMismatch, "gradients do not match the parameter layout");
  }
  if (state.first_moment.layers.empty()) {
    state.first_moment = params.zeros_like();
    state.second_moment = params.zeros_like();
  } else if (!same_layout(params, state.first_moment)) {
    throw Error(ErrorKind::kShapeMismatch, "optimizer state does not match the parameters");
  }
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double bias1 = 1.0 - std::pow(state.beta1, t);
  const double bias2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto& p = params.layers[l];
    const auto& g = grads.layers[l];
    auto& m = state.first_moment.layers[l];
    auto& v = state.second_moment.layers[l];
    update_blob(p.weight, g.weight, m.weight, v.weight, state, bias1, bias2);
    update_blob(p.recurrent, g.recurrent, m.recurrent, v.recurrent, state, bias1, bias2);
    update_blob(p.bias, g.bias, m.bias, v.bias, state, bias1, bias2);
  }
}

template void adam_step<float>(ParamSet<float>&, const ParamSet<float>&, AdamState<float>&);
template void adam_step<double>(ParamSet<double>&, const ParamSet<double>&, AdamState<double>&);

}  // namespace cloudpatch
