#include <benchmark/benchmark.h>

#include "gfs/mathkernel.hpp"

namespace {

void BM_Footprint(benchmark::State& state) {
  gfs::FootprintConfig cfg;
  cfg.fast_path = state.range(0) != 0;
  double f = 0.05, acc = 0.0;
  for (auto _ : state) {
    acc += gfs::footprint(f, cfg);
    f = f > 4.2 ? 0.05 : f + 0.013;
  }
  benchmark::DoNotOptimize(acc);
}
BENCHMARK(BM_Footprint)->Arg(0)->Arg(1)->ArgName("fast_path");

void BM_FootprintGrad(benchmark::State& state) {
  gfs::FootprintConfig cfg;
  double f = 0.05, acc = 0.0;
  for (auto _ : state) {
    acc += gfs::footprint_grad(f, cfg);
    f = f > 4.2 ? 0.05 : f + 0.013;
  }
  benchmark::DoNotOptimize(acc);
}
BENCHMARK(BM_FootprintGrad);

void BM_Oplus(benchmark::State& state) {
  gfs::FootprintConfig cfg;
  double a = 0.1, acc = 0.0;
  for (auto _ : state) {
    acc += gfs::oplus(a, 1.7, cfg);
    a = a > 3.0 ? 0.1 : a + 0.017;
  }
  benchmark::DoNotOptimize(acc);
}
BENCHMARK(BM_Oplus);

}  // namespace
