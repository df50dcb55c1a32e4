// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "mest/designs.hpp"
#include "mest/estimator.hpp"
#include "mest/kernels.hpp"
#include "mest/random.hpp"

using namespace mest;
using namespace mest::kernels;

namespace {

std::vector<double> uniforms(std::size_t n, std::uint64_t seed) {
  RandomStream rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform();
  return v;
}

void BM_SumSerial(benchmark::State& state) {
  const auto v = uniforms(static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sum_terms_serial(v.size(), [&](std::size_t i) { return std::log(v[i]); }).sum);
  }
}

void BM_SumParallel(benchmark::State& state) {
  const auto v = uniforms(static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sum_terms_parallel(v.size(), [&](std::size_t i) { return std::log(v[i]); }).sum);
  }
}

void BM_PairwiseSerial(benchmark::State& state) {
  const auto v = uniforms(static_cast<std::size_t>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(pairwise_mean_distance_serial(v, 1, 1.0));
}

void BM_PairwiseParallel(benchmark::State& state) {
  const auto v = uniforms(static_cast<std::size_t>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(pairwise_mean_distance_parallel(v, 1, 1.0));
}

void criterion_bench(benchmark::State& state, bool parallel) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto link = gev_regression_link();
  const std::vector<double> eta0{1.0, 0.5, 0.0, 0.5, -0.2};
  const auto data = generate_row(uniform_grid_design(), link, eta0, n, 3);
  Criterion crit = log_score_criterion(link, data);
  crit.parallel = parallel;
  for (auto _ : state) benchmark::DoNotOptimize(criterion_value(crit, eta0));
}

void BM_CriterionSerial(benchmark::State& state) { criterion_bench(state, false); }
void BM_CriterionParallel(benchmark::State& state) { criterion_bench(state, true); }

}  // namespace

BENCHMARK(BM_SumSerial)->Arg(1 << 12)->Arg(1 << 16)->Arg(1 << 20);
BENCHMARK(BM_SumParallel)->Arg(1 << 12)->Arg(1 << 16)->Arg(1 << 20);
BENCHMARK(BM_PairwiseSerial)->Arg(256)->Arg(2048);
BENCHMARK(BM_PairwiseParallel)->Arg(256)->Arg(2048);
BENCHMARK(BM_CriterionSerial)->Arg(3200)->Arg(100000);
BENCHMARK(BM_CriterionParallel)->Arg(3200)->Arg(100000);

BENCHMARK_MAIN();
