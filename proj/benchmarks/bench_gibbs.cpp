// Full-sweep and per-step costs of the Gibbs sampler on the eight-covariate
// benchmark design (n = 500, 40 level effects).

#include <benchmark/benchmark.h>

#include <memory>

#include "effusion/gibbs.hpp"
#include "effusion/simstudy.hpp"

namespace {

using namespace effusion;

struct BenchChain {
  sim::Dataset data;
  std::vector<design::CovariateSpec> specs;
  std::vector<prior::HyperParams> hypers;
  std::unique_ptr<gibbs::GibbsSampler> sampler;

  BenchChain() {
    const auto sd = sim::SimulationDesign::benchmark();
    data = sim::generate_dataset(sd, 42, 0);
    specs = sd.specs();
    const sim::StudySetting setting;
    for (const auto& spec : specs)
      hypers.push_back(setting.hyper_for(spec.scale));
    gibbs::SamplerConfig cfg;
    sampler = std::make_unique<gibbs::GibbsSampler>(
        data.dm, data.y, specs, hypers, cfg, rng::derive(42, "bench-chain"));
    sampler->initialize();
    for (int i = 0; i < 50; ++i) sampler->sweep(false);
  }
};

BenchChain& chain() {
  static BenchChain c;
  return c;
}

void BM_Sweep(benchmark::State& state) {
  auto& c = chain();
  for (auto _ : state) c.sampler->sweep(false);
}
BENCHMARK(BM_Sweep);

void BM_SampleBeta(benchmark::State& state) {
  auto& c = chain();
  for (auto _ : state) c.sampler->sample_beta();
}
BENCHMARK(BM_SampleBeta);

void BM_SampleDelta(benchmark::State& state) {
  auto& c = chain();
  for (auto _ : state) c.sampler->sample_delta();
}
BENCHMARK(BM_SampleDelta);

void BM_RefreshStructure(benchmark::State& state) {
  auto& c = chain();
  for (auto _ : state) c.sampler->refresh_structure();
}
BENCHMARK(BM_RefreshStructure);

void BM_Iat(benchmark::State& state) {
  rng::Stream s(rng::derive(42, "bench-iat"));
  std::vector<double> series(static_cast<std::size_t>(state.range(0)));
  double x = 0.0;
  for (auto& v : series) v = x = 0.8 * x + s.normal();
  for (auto _ : state)
    benchmark::DoNotOptimize(gibbs::integrated_autocorrelation_time(series));
}
BENCHMARK(BM_Iat)->Arg(10000)->Arg(100000);

}  // namespace
