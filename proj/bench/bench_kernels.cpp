// Parallel kernels vs their serial reference paths. Both paths produce
// bit-identical results (ordered reduction), so the comparison is pure timing.

#include <benchmark/benchmark.h>

#include "tracelab/harness.hpp"

using namespace tracelab;

namespace {

void bench_populate_scales(benchmark::State& state) {
  const bool parallel = state.range(0) != 0;
  const int depth = int(state.range(1));
  const Lattice lat(Window{2, 2, depth}, DilationParam{0});
  const auto w = Weight::power_t(2, 0.5);
  for (auto _ : state) {
    auto sc = populate_scales(lat, w, depth, parallel);
    benchmark::DoNotOptimize(sc.hat);
  }
}

void bench_sobolev_norm(benchmark::State& state) {
  const bool parallel = state.range(0) != 0;
  const Lattice lat(Window{1, 2, 5}, DilationParam{0});
  const auto w = Weight::power_t(1, 0.5);
  const auto f = catalog_halfspace("sin", 1, 2, 1);
  Box box;
  box.lo = {0};
  box.len = {lat.W};
  for (auto _ : state) {
    auto rep = weighted_sobolev_norm(lat, f, w, box, 0.0, 2.0, 1, parallel);
    benchmark::DoNotOptimize(rep.value);
  }
}

void bench_lemma_cover(benchmark::State& state) {
  // select_cover itself is serial; the harness runs cases in parallel
  ExperimentConfig cfg;
  cfg.suite = "lemma4.1";
  cfg.n = 2;
  cfg.M = 2;
  cfg.depth = 3;
  cfg.cases = int(state.range(0));
  cfg.seed = 7;
  for (auto _ : state) {
    auto rep = run_verification_suite(cfg, "");
    benchmark::DoNotOptimize(rep.ok);
  }
}

}  // namespace

BENCHMARK(bench_populate_scales)
    ->ArgsProduct({{0, 1}, {4, 6}})
    ->ArgNames({"omp", "depth"})
    ->Unit(benchmark::kMillisecond);
BENCHMARK(bench_sobolev_norm)
    ->Arg(0)
    ->Arg(1)
    ->ArgName("omp")
    ->Unit(benchmark::kMillisecond);
BENCHMARK(bench_lemma_cover)->Arg(25)->ArgName("cases")->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
