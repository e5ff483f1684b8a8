#include <random>

#include <benchmark/benchmark.h>

#include "mgst/grid.hpp"
#include "mgst/shrinkage.hpp"
#include "mgst/transforms.hpp"
#include "mgst/unfold.hpp"

namespace {

mgst::Image noise_image(int n, int channels, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  mgst::Image x(n, n, channels);
  for (double& v : x.values()) v = u(rng);
  return x;
}

void BM_ConvolvePeriodic(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const int ks = static_cast<int>(state.range(1));
  const mgst::Image x = noise_image(n, 1, 1);
  const mgst::Kernel k = mgst::Kernel::gaussian(ks, ks / 6.0);
  for (auto _ : state) benchmark::DoNotOptimize(mgst::convolve(x, k));
  state.SetItemsProcessed(state.iterations() * n * n);
}
BENCHMARK(BM_ConvolvePeriodic)->Args({64, 9})->Args({256, 15})->Args({512, 31});

void BM_ConvolveReflect(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const mgst::Image x = noise_image(n, 1, 2);
  const mgst::Kernel k = mgst::Kernel::gaussian(15, 2.5);
  for (auto _ : state) benchmark::DoNotOptimize(mgst::convolve(x, k, mgst::Boundary::reflect));
  state.SetItemsProcessed(state.iterations() * n * n);
}
BENCHMARK(BM_ConvolveReflect)->Arg(64)->Arg(256);

void BM_Gst(benchmark::State& state) {
  const mgst::GstConfig cfg{0.5, 0.3, static_cast<int>(state.range(0)), 1e-5};
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::vector<double> ys(4096);
  for (double& y : ys) y = u(rng);
  for (auto _ : state) {
    double acc = 0.0;
    for (double y : ys) acc += mgst::gst(y, cfg);
    benchmark::DoNotOptimize(acc);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(ys.size()));
}
BENCHMARK(BM_Gst)->Arg(3)->Arg(50);

void BM_HaarAnalyzeSynthesize(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const mgst::Image x = noise_image(n, 3, 4);
  const mgst::TransformSpec spec{mgst::TransformKind::haar, 3, mgst::SkipMode::direct, {}, nullptr, {}};
  for (auto _ : state) benchmark::DoNotOptimize(mgst::synthesize(mgst::analyze(x, spec), spec));
}
BENCHMARK(BM_HaarAnalyzeSynthesize)->Arg(64)->Arg(256);

void BM_UnfoldRun(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const mgst::Image g = mgst::convolve(noise_image(n, 1, 5), mgst::Kernel::gaussian(9, 1.5));
  mgst::UnfoldConfig cfg;
  cfg.kernel_size = 9;
  cfg.reset_params();
  for (auto _ : state) benchmark::DoNotOptimize(mgst::run(g, cfg));
}
BENCHMARK(BM_UnfoldRun)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
