#include <benchmark/benchmark.h>

#include "drgrade/preprocess.hpp"
#include "drgrade/synthgen.hpp"

namespace {

using namespace drgrade;

void BM_Convolve2d(benchmark::State& state) {
  const auto n = static_cast<std::uint32_t>(state.range(0));
  const int radius = static_cast<int>(state.range(1));
  Plane img(n, n);
  for (std::size_t i = 0; i < img.data().size(); ++i) img.data()[i] = static_cast<double>(i % 251);
  GaussianParams p;
  p.radius_a = p.radius_b = radius;
  const Kernel k = gaussian_kernel(p);
  for (auto _ : state) benchmark::DoNotOptimize(convolve2d(img, k));
  state.SetItemsProcessed(state.iterations() * n * n);
}
BENCHMARK(BM_Convolve2d)->Args({256, 1})->Args({256, 3})->Args({512, 3})->Unit(benchmark::kMillisecond);

void BM_Clahe(benchmark::State& state) {
  FundusSpec spec;
  spec.width = spec.height = static_cast<std::uint32_t>(state.range(0));
  const RgbImage img = gen_fundus(1, spec).image;
  for (auto _ : state) benchmark::DoNotOptimize(clahe_rgb(img, 2.0, 8));
}
BENCHMARK(BM_Clahe)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_ColorNormalize(benchmark::State& state) {
  const SyntheticFundus f = gen_fundus(2, FundusSpec{});
  const ColorStats ref{{140, 70, 40}, {30, 20, 12}};
  for (auto _ : state) benchmark::DoNotOptimize(color_normalize(f.image, ref, f.field));
}
BENCHMARK(BM_ColorNormalize)->Unit(benchmark::kMicrosecond);

}  // namespace
