#include <benchmark/benchmark.h>

#include "bench_common.hpp"
#include "fuq/gsa.hpp"

namespace {

void BM_PlugInSobolTruth(benchmark::State& state) {
  const auto spec = fuq::linear_testbed();
  const fuq::AnalyticSurrogate truth(spec);
  const auto grid = fuq::ImGrid::regular(0.1, 25.0, 30);
  const auto design = fuq::pickfreeze_design(static_cast<std::size_t>(state.range(0)), fuq::input_laws(spec.inputs), 3);
  for (auto _ : state) benchmark::DoNotOptimize(fuq::aggregated_sobol(fuq::design_curves_psi1(truth, design, grid, 1.0)));
}
BENCHMARK(BM_PlugInSobolTruth)->Arg(5000)->Arg(20000)->Unit(benchmark::kMillisecond);

void BM_Mmd2(benchmark::State& state) {
  const auto spec = fuq::linear_testbed();
  const auto grid = fuq::ImGrid::regular(0.1, 25.0, 30);
  const auto design = fuq::pickfreeze_design(static_cast<std::size_t>(state.range(0)), fuq::input_laws(spec.inputs), 3);
  const auto curves = fuq::design_curves_psi1(fuq::AnalyticSurrogate(spec), design, grid, 1.0);
  const fuq::CurveKernel kernel(fuq::bandwidth_heuristic(curves.base(), grid), grid);
  for (auto _ : state) benchmark::DoNotOptimize(fuq::mmd2(curves.base(), curves.copy(), kernel));
}
BENCHMARK(BM_Mmd2)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);

void BM_PosteriorSensitivity(benchmark::State& state) {
  const auto model = bench::testbed_model(300);
  const auto grid = fuq::ImGrid::regular(0.1, 25.0, 30);
  const auto design =
      fuq::pickfreeze_design(static_cast<std::size_t>(state.range(0)), fuq::input_laws(fuq::default_inputs()), 3);
  fuq::PosteriorGsaConfig cfg;
  cfg.draws = 20;
  cfg.bootstrap = 30;
  for (auto _ : state) benchmark::DoNotOptimize(fuq::posterior_sensitivity(model, design, grid, 1.0, cfg));
}
BENCHMARK(BM_PosteriorSensitivity)->Arg(1000)->Unit(benchmark::kMillisecond)->Iterations(1);

}  // namespace
