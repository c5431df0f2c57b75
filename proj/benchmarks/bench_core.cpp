#include <benchmark/benchmark.h>

#include "ldslab/experiments.hpp"
#include "ldslab/ols.hpp"
#include "ldslab/system_builder.hpp"
#include "ldslab/trajectory.hpp"

namespace {

using namespace ldslab;

void BM_SingularValues(benchmark::State& state) {
  const Mat m = gaussian_matrix(30, 300, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(singular_values(m));
  }
}
BENCHMARK(BM_SingularValues);

void BM_RowHyperplaneDistances(benchmark::State& state) {
  const Mat m = gaussian_matrix(30, 300, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(row_hyperplane_distances(m));
  }
}
BENCHMARK(BM_RowHyperplaneDistances);

void BM_Simulate(benchmark::State& state) {
  const Mat a = build_system(SystemSpec::diagonal(std::vector<double>(30, 0.9)));
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(simulate(a, 300, seed++));
  }
}
BENCHMARK(BM_Simulate);

void BM_EstimateOls(benchmark::State& state) {
  const Mat a = build_system(SystemSpec::diagonal(std::vector<double>(30, 0.9)));
  const DataMatrices data = assemble(simulate(a, 300, 3));
  for (auto _ : state) {
    benchmark::DoNotOptimize(estimate_ols(data));
  }
}
BENCHMARK(BM_EstimateOls);

void BM_JordanBlockPower(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(jordan_block_power(0.9, 20, 200));
  }
}
BENCHMARK(BM_JordanBlockPower);

void BM_SolveLyapunov(benchmark::State& state) {
  Mat g = gaussian_matrix(30, 30, 4);
  const Mat a = g * (0.9 / spectral_radius(g));
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_lyapunov(a, 1e-10));
  }
}
BENCHMARK(BM_SolveLyapunov);

void BM_CovarianceBlowupExperiment(benchmark::State& state) {
  ExperimentConfig cfg = default_experiment_config(ExperimentKind::kCovarianceBlowup);
  cfg.k_max = 200;
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_experiment(cfg));
  }
}
BENCHMARK(BM_CovarianceBlowupExperiment);

}  // namespace

BENCHMARK_MAIN();
