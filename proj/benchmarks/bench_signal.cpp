#include "ctflow/common.hpp"
#include "ctflow/signal.hpp"

#include <benchmark/benchmark.h>

using namespace ctflow;

namespace {

Waveform noise(std::size_t n) {
  Rng rng(1);
  Waveform w;
  w.sample_rate = 16000;
  for (std::size_t i = 0; i < n; ++i) w.samples.push_back(rng.normal());
  return w;
}

void BM_Stft(benchmark::State& state) {
  const Waveform w = noise(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(stft(w, StftParams{}).data.data());
  state.SetBytesProcessed(state.iterations() * state.range(0) * sizeof(double));
}
BENCHMARK(BM_Stft)->Arg(16000)->Arg(32640);

void BM_StftRoundTrip(benchmark::State& state) {
  const Waveform w = noise(32640);
  for (auto _ : state) benchmark::DoNotOptimize(istft(stft(w, StftParams{})).samples.data());
}
BENCHMARK(BM_StftRoundTrip);

void BM_SiSdr(benchmark::State& state) {
  const Waveform a = noise(32640), b = noise(32640);
  for (auto _ : state) benchmark::DoNotOptimize(si_sdr(a, b));
}
BENCHMARK(BM_SiSdr);

}  // namespace

BENCHMARK_MAIN();
