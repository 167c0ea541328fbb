// Whitening kernel: OpenMP subject loop vs its serial twin vs the dense
// eigendecomposition reference. Arguments: m (observations per subject).

#include <benchmark/benchmark.h>

#include "cme/gibbs.hpp"
#include "cme/simulation.hpp"

using namespace cme;

namespace {

struct Fixture {
  CmeSampler sampler;
  VectorXd gamma;
};

Fixture make(Index m) {
  SimScenario s;
  s.m = m;
  const SimData d = gen_dataset(s, 1);
  Rng rng(2);
  return {CmeSampler(d.train, draw_projection_pair(d.train.q, s.k1, s.k2, 3), PriorConfig{}),
          rng.normal_vector(s.k1 * s.k2)};
}

void BM_whiten_parallel(benchmark::State& st) {
  const Fixture f = make(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(f.sampler.whiten(f.gamma, true, Execution::parallel));
}

void BM_whiten_serial(benchmark::State& st) {
  const Fixture f = make(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(f.sampler.whiten(f.gamma, true, Execution::serial));
}

void BM_whiten_reference(benchmark::State& st) {
  const Fixture f = make(st.range(0));
  for (auto _ : st)
    benchmark::DoNotOptimize(whiten_reference(f.sampler.data(), f.sampler.projection(), f.gamma));
}

}  // namespace

BENCHMARK(BM_whiten_parallel)->Arg(4)->Arg(12)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_whiten_serial)->Arg(4)->Arg(12)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_whiten_reference)->Arg(4)->Arg(12)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
