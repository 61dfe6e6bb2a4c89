#include <benchmark/benchmark.h>

#include <random>

#include "cloudpatch/layers.hpp"
#include "cloudpatch/lstm.hpp"
#include "cloudpatch/models.hpp"

using namespace cloudpatch;

namespace {

Tensor4<float> random_tensor(const Shape4& s, std::mt19937_64& rng) {
  std::normal_distribution<float> normal;
  Tensor4<float> t(s);
  for (auto& v : t.values()) v = normal(rng);
  return t;
}

void BM_Conv2dForward(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const auto cin = static_cast<std::size_t>(state.range(1));
  const auto cout = static_cast<std::size_t>(state.range(2));
  std::mt19937_64 rng(1);
  const auto x = random_tensor(Shape4{4, side, side, cin}, rng);
  const auto p = make_conv_layer<float>("c", cin, cout, rng);
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, p));
  state.SetItemsProcessed(state.iterations() * 4);
}
BENCHMARK(BM_Conv2dForward)->Args({64, 9, 32})->Args({64, 32, 64})->Args({64, 64, 128});

void BM_Conv2dBackward(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const auto cin = static_cast<std::size_t>(state.range(1));
  const auto cout = static_cast<std::size_t>(state.range(2));
  std::mt19937_64 rng(2);
  const auto x = random_tensor(Shape4{4, side, side, cin}, rng);
  const auto g = random_tensor(Shape4{4, side, side, cout}, rng);
  const auto p = make_conv_layer<float>("c", cin, cout, rng);
  for (auto _ : state) benchmark::DoNotOptimize(conv2d_backward(g, x, p));
  state.SetItemsProcessed(state.iterations() * 4);
}
BENCHMARK(BM_Conv2dBackward)->Args({64, 32, 64})->Args({64, 64, 128});

void BM_LstmStep(benchmark::State& state) {
  const auto in = static_cast<std::size_t>(state.range(0));
  const auto units = static_cast<std::size_t>(state.range(1));
  std::mt19937_64 rng(3);
  const auto p = make_lstm_layer<float>("l", in, units, rng);
  const auto x = random_tensor(Shape4{2, 1, 1, in}, rng);
  const Tensor4<float> h(Shape4{2, 1, 1, units});
  for (auto _ : state) benchmark::DoNotOptimize(lstm_step(x, h, h, p));
}
BENCHMARK(BM_LstmStep)->Args({1024, 64})->Args({8192, 64});

void BM_PredictCnn(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const auto spec = ModelSpec::for_kind(ModelKind::kCnn, side, side);
  const auto params = build_model<float>(spec, 1);
  std::mt19937_64 rng(4);
  const auto batch = random_tensor(Shape4{1, side, side, kInputChannels}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(predict(spec, params, batch));
}
BENCHMARK(BM_PredictCnn)->Arg(32)->Arg(64);

}  // namespace
