#include "cloudpatch/tensor.hpp"

#include <cmath>

namespace cloudpatch {

std::string Shape4::str() const {
  return "(" + std::to_string(n) + "," + std::to_string(h) + "," + std::to_string(w) + "," +
         std::to_string(c) + ")";
}

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::kConv2d: return "conv2d";
    case LayerKind::kDense: return "dense";
    case LayerKind::kLstm: return "lstm";
  }
  return "unknown";
}

namespace {

template <class T>
Blob<T> uniform_blob(std::vector<std::size_t> shape, double limit, std::mt19937_64& rng) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  std::uniform_real_distribution<double> dist(-limit, limit);
  Blob<T> b{std::move(shape), std::vector<T>(n)};
  for (auto& v : b.values) v = static_cast<T>(dist(rng));
  return b;
}

}  // namespace

template <class T>
LayerParams<T> make_conv_layer(std::string name, std::size_t in_channels,
                               std::size_t out_channels, std::mt19937_64& rng) {
  const double fan_in = 9.0 * static_cast<double>(in_channels);
  const double fan_out = 9.0 * static_cast<double>(out_channels);
  LayerParams<T> p;
  p.name = std::move(name);
  p.kind = LayerKind::kConv2d;
  p.weight = uniform_blob<T>({3, 3, in_channels, out_channels}, std::sqrt(6.0 / (fan_in + fan_out)), rng);
  p.bias = Blob<T>{{out_channels}, std::vector<T>(out_channels, T{})};
  return p;
}

template <class T>
LayerParams<T> make_dense_layer(std::string name, std::size_t in_dim, std::size_t out_dim,
                                std::mt19937_64& rng) {
  LayerParams<T> p;
  p.name = std::move(name);
  p.kind = LayerKind::kDense;
  p.weight = uniform_blob<T>({in_dim, out_dim},
                             std::sqrt(6.0 / static_cast<double>(in_dim + out_dim)), rng);
  p.bias = Blob<T>{{out_dim}, std::vector<T>(out_dim, T{})};
  return p;
}

template <class T>
LayerParams<T> make_lstm_layer(std::string name, std::size_t in_dim, std::size_t units,
                               std::mt19937_64& rng) {
  LayerParams<T> p;
  p.name = std::move(name);
  p.kind = LayerKind::kLstm;
  p.weight = uniform_blob<T>({in_dim, 4 * units},
                             std::sqrt(6.0 / static_cast<double>(in_dim + 4 * units)), rng);
  p.recurrent = uniform_blob<T>({units, 4 * units}, std::sqrt(1.0 / static_cast<double>(units)), rng);
  p.bias = Blob<T>{{4 * units}, std::vector<T>(4 * units, T{})};
  for (std::size_t u = 0; u < units; ++u) p.bias.values[units + u] = T{1};
  return p;
}

#define CLOUDPATCH_INSTANTIATE(T)                                                              \
  template LayerParams<T> make_conv_layer<T>(std::string, std::size_t, std::size_t,            \
                                             std::mt19937_64&);                                \
  template LayerParams<T> make_dense_layer<T>(std::string, std::size_t, std::size_t,           \
                                              std::mt19937_64&);                               \
  template LayerParams<T> make_lstm_layer<T>(std::string, std::size_t, std::size_t,            \
                                             std::mt19937_64&);
CLOUDPATCH_INSTANTIATE(float)
CLOUDPATCH_INSTANTIATE(double)
#undef CLOUDPATCH_INSTANTIATE

}  // namespace cloudpatch
