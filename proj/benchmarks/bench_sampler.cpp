#include "ctflow/sampler.hpp"

#include <benchmark/benchmark.h>

using namespace ctflow;

namespace {

// Sampling cost grows with the number of model evaluations.
void BM_Sample(benchmark::State& state, Scheme scheme) {
  const Eigen::Index d = 512;
  VectorFieldModel m = VectorFieldModel::initialized({d, 128, 2, 32}, 1);
  Rng init(2);
  m.set_parameters(m.parameters() + 0.01 * init.normal_vector(m.parameter_count()));
  const StateVector y = init.normal_vector(d);
  SamplerConfig cfg;
  cfg.scheme = scheme;
  cfg.steps = static_cast<int>(state.range(0));
  Rng rng(3);
  for (auto _ : state) benchmark::DoNotOptimize(sample(m, nullptr, y, cfg, rng).estimate.data());
  state.counters["nfe"] = nfe_for(scheme, cfg.steps);
}
BENCHMARK_CAPTURE(BM_Sample, flowse, Scheme::FlowSE)->DenseRange(1, 6)->Arg(30);
BENCHMARK_CAPTURE(BM_Sample, ctfse, Scheme::CTFSE)->DenseRange(1, 6)->Arg(30);

}  // namespace
