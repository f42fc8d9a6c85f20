#include <random>

#include <benchmark/benchmark.h>

#include "gfs/colorprop.hpp"

namespace {

std::vector<gfs::Vec3> points(std::size_t n) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<gfs::Vec3> p(n);
  for (auto& x : p) x = gfs::Vec3(g(rng), g(rng), g(rng)).normalized();
  return p;
}

void BM_Knn(benchmark::State& state) {
  const auto p = points(std::size_t(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(gfs::knn(p, 10));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Knn)->Arg(500)->Arg(4000)->Arg(20000)->Unit(benchmark::kMillisecond);

}  // namespace
