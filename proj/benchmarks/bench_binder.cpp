// Binder-loss minimisation: exact enumeration versus the contiguous DP and
// the greedy search, across level counts.

#include <benchmark/benchmark.h>

#include <Eigen/Dense>

#include "effusion/rng.hpp"
#include "effusion/select.hpp"

namespace {

using namespace effusion;

Eigen::MatrixXd random_similarity(int m) {
  rng::Stream s(rng::derive(42, "bench-pi", m));
  Eigen::MatrixXd pi = Eigen::MatrixXd::Identity(m, m);
  for (int k = 1; k < m; ++k)
    for (int j = 0; j < k; ++j) pi(k, j) = pi(j, k) = s.uniform();
  return pi;
}

void BM_BinderExact(benchmark::State& state) {
  const auto pi = random_similarity(static_cast<int>(state.range(0)));
  for (auto _ : state)
    benchmark::DoNotOptimize(select::minimize_binder_exact(pi));
}
BENCHMARK(BM_BinderExact)->Arg(6)->Arg(8)->Arg(10);

void BM_BinderContiguous(benchmark::State& state) {
  const auto pi = random_similarity(static_cast<int>(state.range(0)));
  for (auto _ : state)
    benchmark::DoNotOptimize(select::minimize_binder_contiguous(pi));
}
BENCHMARK(BM_BinderContiguous)->Arg(8)->Arg(16)->Arg(32);

void BM_BinderGreedy(benchmark::State& state) {
  const auto pi = random_similarity(static_cast<int>(state.range(0)));
  for (auto _ : state)
    benchmark::DoNotOptimize(select::minimize_binder_greedy(pi));
}
BENCHMARK(BM_BinderGreedy)->Arg(8)->Arg(16)->Arg(32);

}  // namespace
