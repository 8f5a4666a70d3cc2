#include "ctflow/gradient.hpp"

#include <benchmark/benchmark.h>

#include <vector>

using namespace ctflow;

namespace {

VectorFieldModel toy_model(Eigen::Index d) {
  VectorFieldModel m = VectorFieldModel::initialized({d, 128, 2, 32}, 1);
  Rng rng(2);
  m.set_parameters(m.parameters() + 0.01 * rng.normal_vector(m.parameter_count()));
  return m;
}

void BM_Forward(benchmark::State& state) {
  const Eigen::Index d = state.range(0);
  const VectorFieldModel m = toy_model(d);
  Rng rng(3);
  const StateVector x = rng.normal_vector(d), c = rng.normal_vector(d);
  for (auto _ : state) benchmark::DoNotOptimize(m(x, c, 0.4));
}
BENCHMARK(BM_Forward)->Arg(64)->Arg(512);

void BM_LossGradient(benchmark::State& state) {
  const Eigen::Index d = 512;
  const VectorFieldModel m = toy_model(d);
  Rng rng(4);
  std::vector<TrainingPair> batch;
  for (int i = 0; i < state.range(0); ++i) {
    const StateVector x0 = rng.normal_vector(d);
    batch.push_back({x0, x0 + 0.5 * rng.normal_vector(d)});
  }
  const auto noise = draw_noise(batch.size(), d, kDefaultTDelta, rng);
  for (auto _ : state) benchmark::DoNotOptimize(loss_gradient(m, batch, {}, {}, noise).gradient.data());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LossGradient)->Arg(1)->Arg(8);

}  // namespace
