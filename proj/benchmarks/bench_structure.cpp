// Structure matrix assembly and the associated linear algebra across level
// counts; the direct build is the per-sweep hot path.

#include <benchmark/benchmark.h>

#include <Eigen/Dense>

#include "effusion/design.hpp"
#include "effusion/prior.hpp"
#include "effusion/rng.hpp"

namespace {

using namespace effusion;

design::CovariateSpec nominal(int c) {
  std::vector<std::string> levels;
  for (int k = 0; k <= c; ++k) levels.push_back(std::to_string(k));
  return design::CovariateSpec::make("x", std::move(levels),
                                     design::Scale::nominal);
}

prior::IndicatorState mixed_delta(const design::CovariateSpec& spec) {
  rng::Stream s(rng::derive(42, "bench-delta", spec.c()));
  auto d = prior::IndicatorState::all_ones(spec);
  for (auto& b : d.bits) b = s.uniform() < 0.5 ? 0 : 1;
  return d;
}

void BM_BuildStructure(benchmark::State& state) {
  const auto spec = nominal(static_cast<int>(state.range(0)));
  const auto delta = mixed_delta(spec);
  for (auto _ : state)
    benchmark::DoNotOptimize(
        prior::build_structure_matrix(spec, delta, 20000.0));
}
BENCHMARK(BM_BuildStructure)->Arg(3)->Arg(7)->Arg(15)->Arg(25);

void BM_RestrictionOracle(benchmark::State& state) {
  const auto spec = nominal(static_cast<int>(state.range(0)));
  const auto delta = mixed_delta(spec);
  for (auto _ : state)
    benchmark::DoNotOptimize(
        prior::structure_matrix_via_restriction(spec, delta, 20000.0));
}
BENCHMARK(BM_RestrictionOracle)->Arg(3)->Arg(7)->Arg(15);

void BM_StructureCholesky(benchmark::State& state) {
  const auto spec = nominal(static_cast<int>(state.range(0)));
  const auto Q =
      prior::build_structure_matrix(spec, mixed_delta(spec), 20000.0);
  for (auto _ : state)
    benchmark::DoNotOptimize(prior::structure_cholesky(Q));
}
BENCHMARK(BM_StructureCholesky)->Arg(3)->Arg(7)->Arg(15)->Arg(25);

void BM_QuadraticFormPairwise(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  const auto spec = nominal(c);
  const auto delta = mixed_delta(spec);
  rng::Stream s(rng::derive(42, "bench-beta", c));
  Eigen::VectorXd beta(c);
  for (int k = 0; k < c; ++k) beta(k) = s.normal();
  for (auto _ : state)
    benchmark::DoNotOptimize(
        prior::quadratic_form_pairwise(spec, delta, 20000.0, beta));
}
BENCHMARK(BM_QuadraticFormPairwise)->Arg(3)->Arg(7)->Arg(15)->Arg(25);

void BM_ConditionalDeltaProbability(benchmark::State& state) {
  double theta = 0.0;
  for (auto _ : state) {
    theta += 1e-6;
    benchmark::DoNotOptimize(
        prior::conditional_delta_probability(theta, 2.0, 2.0, 20000.0));
  }
}
BENCHMARK(BM_ConditionalDeltaProbability);

}  // namespace

BENCHMARK_MAIN();
