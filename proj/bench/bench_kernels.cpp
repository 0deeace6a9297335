#include <benchmark/benchmark.h>

#include <cmath>

#include "twistflow/flow.hpp"
#include "twistflow/kernels.hpp"

using namespace twistflow;

namespace {

Exec mode(const benchmark::State& st) { return st.range(1) ? Exec::Parallel : Exec::Serial; }

void label(benchmark::State& st) { st.SetLabel(st.range(1) ? "parallel" : "serial"); }

void BM_HermitianFunction(benchmark::State& st) {
  const auto g = make_torus({0.0, 1.0}, static_cast<int>(st.range(0)));
  const auto b = make_heisenberg(g, 3, 1);
  const auto x = random_hermitian_field(*b, 3, 0.5);
  for (auto _ : st) benchmark::DoNotOptimize(hermitian_function(x, [](double v) { return std::exp(v); }, mode(st)));
  label(st);
}

void BM_MeanCurvature(benchmark::State& st) {
  const auto g = make_torus({0.0, 1.0}, static_cast<int>(st.range(0)));
  const auto b = make_atiyah_f2(g, 1.0);
  const auto h = MetricState::from_exponent(b, random_hermitian_field(*b, 3, 0.5));
  set_default_exec(mode(st));
  for (auto _ : st) benchmark::DoNotOptimize(mean_curvature(*b, h));
  set_default_exec(Exec::Parallel);
  label(st);
}

void BM_FlowStep(benchmark::State& st) {
  const auto g = make_torus({0.0, 1.0}, static_cast<int>(st.range(0)));
  const auto b = make_atiyah_f2(g, 1.0);
  const auto h = MetricState::from_exponent(b, random_hermitian_field(*b, 3, 0.5));
  set_default_exec(mode(st));
  for (auto _ : st) benchmark::DoNotOptimize(flow_step(*b, h, 0.05));
  set_default_exec(Exec::Parallel);
  label(st);
}

void grid_args(benchmark::internal::Benchmark* bm) {
  for (int n : {32, 64, 128})
    for (int par : {0, 1}) bm->Args({n, par});
}

}  // namespace

BENCHMARK(BM_HermitianFunction)->Apply(grid_args)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_MeanCurvature)->Apply(grid_args)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_FlowStep)->Apply(grid_args)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
