#include <benchmark/benchmark.h>

#include "cloudpatch/baseline.hpp"
#include "cloudpatch/maskgen.hpp"
#include "cloudpatch/synth.hpp"

using namespace cloudpatch;

namespace {

void BM_InterpolateImage(benchmark::State& state) {
  SceneConfig sc;
  sc.height = sc.width = static_cast<std::size_t>(state.range(0));
  sc.n_dates = 6;
  const auto scene = generate_scene(sc);
  const auto gapped = apply_mask(scene.images[0], generate_mask(sc.height, sc.width, GrfConfig{}));
  for (auto _ : state) benchmark::DoNotOptimize(interpolate_image(gapped));
}
BENCHMARK(BM_InterpolateImage)->Arg(64)->Arg(128);

void BM_GenerateScene(benchmark::State& state) {
  SceneConfig sc;
  sc.n_dates = 10;
  for (auto _ : state) benchmark::DoNotOptimize(generate_scene(sc));
}
BENCHMARK(BM_GenerateScene)->Unit(benchmark::kMillisecond);

}  // namespace
