#include <benchmark/benchmark.h>

#include "drgrade/lesions.hpp"
#include "drgrade/synthgen.hpp"

namespace {

using namespace drgrade;

SyntheticFundus busy_fundus() {
  FundusSpec spec;
  spec.lesions[LesionKind::kHEM] = default_lesion_spec(LesionKind::kHEM, {12, 12, 12, 12});
  return gen_fundus(3, spec);
}

void BM_Otsu(benchmark::State& state) {
  const SyntheticFundus f = busy_fundus();
  const ProbMask p = soft_probability(f.lesions.at(LesionKind::kHEM), 4);
  for (auto _ : state) benchmark::DoNotOptimize(otsu_threshold(p));
}
BENCHMARK(BM_Otsu)->Unit(benchmark::kMicrosecond);

void BM_ConnectedComponents(benchmark::State& state) {
  const SyntheticFundus f = busy_fundus();
  const BinaryMask& m = f.lesions.at(LesionKind::kHEM);
  for (auto _ : state) benchmark::DoNotOptimize(connected_components(m, 5));
}
BENCHMARK(BM_ConnectedComponents)->Unit(benchmark::kMicrosecond);

void BM_AnalyzeAndStage(benchmark::State& state) {
  const SyntheticFundus f = busy_fundus();
  std::map<LesionKind, ProbMask> probs;
  for (const auto& [kind, truth] : f.lesions) probs.emplace(kind, soft_probability(truth, 5));
  const Point c = fundus_center(f.field);
  for (auto _ : state) {
    std::map<LesionKind, LesionMap> maps;
    for (const auto& [kind, p] : probs) maps[kind] = analyze_lesion(kind, p, {}).map;
    benchmark::DoNotOptimize(stage(maps, 256, 256, c));
  }
}
BENCHMARK(BM_AnalyzeAndStage)->Unit(benchmark::kMillisecond);

}  // namespace
