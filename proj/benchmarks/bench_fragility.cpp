#include <benchmark/benchmark.h>

#include "bench_common.hpp"
#include "fuq/fragility.hpp"

namespace {

void BM_Psi1Curves(benchmark::State& state) {
  const auto model = bench::testbed_model(500);
  const auto xs = fuq::sample_inputs(fuq::default_inputs(), static_cast<std::size_t>(state.range(0)), 4);
  const auto grid = fuq::ImGrid::regular(0.1, 25.0, 100);
  for (auto _ : state) benchmark::DoNotOptimize(fuq::psi1_curves(model, grid, xs, 1.0));
}
BENCHMARK(BM_Psi1Curves)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_Psi2Samples(benchmark::State& state) {
  const auto model = bench::testbed_model(500);
  const auto xs = fuq::sample_inputs(fuq::default_inputs(), static_cast<std::size_t>(state.range(0)), 4);
  const auto grid = fuq::ImGrid::regular(0.1, 25.0, 50);
  for (auto _ : state) benchmark::DoNotOptimize(fuq::psi2_samples(model, grid, xs, 1.0, 100, 2));
}
BENCHMARK(BM_Psi2Samples)->Arg(200)->Arg(500)->Unit(benchmark::kMillisecond)->Iterations(2);

void BM_BilevelQuantile(benchmark::State& state) {
  const auto model = bench::testbed_model(200);
  const auto xs = fuq::sample_inputs(fuq::default_inputs(), 300, 4);
  const auto grid = fuq::ImGrid::regular(0.1, 25.0, 50);
  const auto ens = fuq::psi2_samples(model, grid, xs, 1.0, 100, 2);
  for (auto _ : state) benchmark::DoNotOptimize(fuq::bilevel_quantile_curve(ens, 0.9, 0.9));
}
BENCHMARK(BM_BilevelQuantile)->Unit(benchmark::kMillisecond);

}  // namespace
