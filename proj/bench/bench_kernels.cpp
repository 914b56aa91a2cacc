// Serial reference vs OpenMP path for the hot kernels. Arg 0 = serial,
// arg 1 = parallel.

#include <benchmark/benchmark.h>

#include <vector>

#include "wuw/features.hpp"
#include "wuw/kernels.hpp"
#include "wuw/nninf.hpp"
#include "wuw/rng.hpp"

using namespace wuw;

namespace {

Exec exec_of(const benchmark::State& state) { return state.range(0) ? Exec::parallel : Exec::serial; }

std::vector<float> noise(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.uniform(-1, 1));
  return v;
}

void BM_Matvec(benchmark::State& state) {
  const std::size_t rows = state.range(1), cols = state.range(2);
  const auto w = noise(rows * cols, 1), x = noise(cols, 2), b = noise(rows, 3);
  std::vector<float> y(rows);
  for (auto _ : state) {
    kernels::matvec(w, x, b, y, exec_of(state));
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * rows * cols);
}
BENCHMARK(BM_Matvec)->ArgsProduct({{0, 1}, {384}, {128}});
BENCHMARK(BM_Matvec)->ArgsProduct({{0, 1}, {2048}, {2048}});

void BM_ConvDirect(benchmark::State& state) {
  const auto x = noise(24000, 4), h = noise(state.range(1), 5);
  std::vector<float> y(x.size());
  for (auto _ : state) {
    kernels::conv_direct(x, h, y, exec_of(state));
    benchmark::DoNotOptimize(y.data());
  }
}
BENCHMARK(BM_ConvDirect)->ArgsProduct({{0, 1}, {512, 4096}})->Unit(benchmark::kMillisecond);

void BM_Mfcc(benchmark::State& state) {
  const AudioClip clip{noise(24000, 6)};
  const auto cfg = state.range(1) == kCloudConfigId ? FeatureConfig::cloud() : FeatureConfig::device();
  for (auto _ : state) benchmark::DoNotOptimize(features::mfcc(clip, cfg, exec_of(state)));
}
BENCHMARK(BM_Mfcc)->ArgsProduct({{0, 1}, {kDeviceConfigId, kCloudConfigId}})->Unit(benchmark::kMicrosecond);

void BM_GruSequence(benchmark::State& state) {
  const auto cfg = FeatureConfig::cloud();
  const auto ws = nn::make_gru_scorer(cfg, {1, 128}, 7);
  const auto p = nn::GruParams::from_store(ws, "gru0");
  const auto frames = noise(148 * 40, 8);
  for (auto _ : state)
    benchmark::DoNotOptimize(nn::gru_sequence(frames, 148, p, nn::Pooling::last, exec_of(state)));
}
BENCHMARK(BM_GruSequence)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
