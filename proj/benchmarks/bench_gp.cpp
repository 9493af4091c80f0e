#include <benchmark/benchmark.h>

#include "bench_common.hpp"
#include "fuq/kernel.hpp"

namespace {

void BM_CovMatrix(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto data = fuq::generate_dataset(fuq::linear_testbed(), fuq::default_im_law(), n, 3);
  const fuq::KernelParams kp{1.0, {2.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0}};
  const std::vector<double> nug(n, 0.01);
  for (auto _ : state) benchmark::DoNotOptimize(fuq::cov_matrix(data.points, kp, nug, 1e-10));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_CovMatrix)->Arg(100)->Arg(250)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_FitHeteroskedastic(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto data = fuq::generate_dataset(fuq::linear_testbed(), fuq::default_im_law(), n, 5);
  fuq::FitConfig cfg;
  cfg.restarts = 1;
  for (auto _ : state) benchmark::DoNotOptimize(fuq::fit_heteroskedastic(data, cfg));
}
BENCHMARK(BM_FitHeteroskedastic)->Arg(100)->Arg(200)->Unit(benchmark::kMillisecond)->Iterations(2);

void BM_Predict(benchmark::State& state) {
  const auto model = bench::testbed_model(500);
  const auto q = fuq::generate_dataset(fuq::linear_testbed(), fuq::default_im_law(),
                                       static_cast<std::size_t>(state.range(0)), 9);
  for (auto _ : state) benchmark::DoNotOptimize(model.predict(std::span<const fuq::InputPoint>(q.points)));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Predict)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_PredictProduct(benchmark::State& state) {
  const auto model = bench::testbed_model(500);
  const auto xs = fuq::sample_inputs(fuq::default_inputs(), static_cast<std::size_t>(state.range(0)), 4);
  const auto grid = fuq::ImGrid::regular(0.1, 25.0, 30);
  fuq::RowMatrix mean, sd;
  for (auto _ : state) {
    model.predict_product(grid.values(), xs, mean, sd);
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * 30);
}
BENCHMARK(BM_PredictProduct)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);

void BM_SamplePosteriorExact(benchmark::State& state) {
  const auto model = bench::testbed_model(300);
  const auto q = fuq::generate_dataset(fuq::linear_testbed(), fuq::default_im_law(),
                                       static_cast<std::size_t>(state.range(0)), 9);
  for (auto _ : state) benchmark::DoNotOptimize(model.sample_posterior(q.points, 200, 1));
}
BENCHMARK(BM_SamplePosteriorExact)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

}  // namespace
