#include <memory>
#include <vector>

#include <benchmark/benchmark.h>

#include "drgrade/classifiers.hpp"
#include "drgrade/ensemble.hpp"
#include "drgrade/synthgen.hpp"

namespace {

using namespace drgrade;

const FeatureDataset& fixture() {
  static const FeatureDataset ds = [] {
    const FeatureDataset raw = gen_features(11, 200, 20, 8.0);
    return apply_scaler(raw, fit_scaler(raw));
  }();
  return ds;
}

void BM_Train(benchmark::State& state) {
  const auto kind = static_cast<ModelKind>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(train(kind, fixture(), {}, 1));
  state.SetLabel(std::string(model_kind_name(kind)));
}
BENCHMARK(BM_Train)->DenseRange(0, 5)->Unit(benchmark::kMillisecond);

void BM_Vote(benchmark::State& state) {
  std::vector<std::shared_ptr<const TrainedModel>> members;
  for (int k = 0; k < 6; ++k) {
    members.push_back(std::make_shared<const TrainedModel>(train(static_cast<ModelKind>(k), fixture(), {}, 1)));
  }
  const EnsembleModel ens = fit_weights(members, fixture());
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(vote(ens, fixture().vectors[i]));
    i = (i + 1) % fixture().size();
  }
}
BENCHMARK(BM_Vote)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
