#include <benchmark/benchmark.h>

#include "cloudpatch/maskgen.hpp"

using namespace cloudpatch;

namespace {

void BM_SampleGrf(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  GrfConfig cfg;
  benchmark::DoNotOptimize(sample_grf(side, side, cfg));
  for (auto _ : state) {
    benchmark::DoNotOptimize(sample_grf(side, side, cfg));
    ++cfg.seed;
  }
}
BENCHMARK(BM_SampleGrf)->Arg(32)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_ThresholdMask(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const auto field = sample_grf(side, side, GrfConfig{});
  for (auto _ : state) benchmark::DoNotOptimize(threshold_mask(field, 0.1));
}
BENCHMARK(BM_ThresholdMask)->Arg(64)->Arg(256);

}  // namespace
