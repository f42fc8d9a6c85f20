#include <random>

#include <benchmark/benchmark.h>

#include "gfs/surfel.hpp"

namespace {

gfs::SurfelSet cloud(std::size_t n) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 1.0);
  gfs::SurfelSet out(n);
  for (auto& s : out) {
    s.center = gfs::Vec3(0.3 * g(rng), 0.3 * g(rng), 3.0 + g(rng));
    gfs::Vec3 n(0.2 * g(rng), 0.2 * g(rng), -1.0);
    n.normalize();
    s.tangent_u = gfs::any_orthogonal(n);
    s.tangent_v = n.cross(s.tangent_u);
    s.scale_u = s.scale_v = 0.2;
    s.weight = 2.0;
  }
  return out;
}

void BM_Intersect(benchmark::State& state) {
  const auto surfels = cloud(1);
  const gfs::Ray ray{gfs::Vec3::Zero(), gfs::Vec3(0.01, -0.02, 1.0).normalized()};
  const gfs::FootprintConfig fp;
  for (auto _ : state) benchmark::DoNotOptimize(gfs::intersect(ray, surfels[0], 0.01, 3.0, fp));
}
BENCHMARK(BM_Intersect);

void BM_IntersectAll(benchmark::State& state) {
  const auto surfels = cloud(std::size_t(state.range(0)));
  const gfs::Ray ray{gfs::Vec3::Zero(), gfs::Vec3(0.01, -0.02, 1.0).normalized()};
  const gfs::FootprintConfig fp;
  for (auto _ : state) benchmark::DoNotOptimize(gfs::intersect_all(ray, surfels, 0.01, 3.0, fp));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_IntersectAll)->Arg(16)->Arg(256)->Arg(4096);

}  // namespace
