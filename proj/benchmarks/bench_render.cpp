#include <benchmark/benchmark.h>

#include "gfs/renderer.hpp"
#include "gfs/scenegen.hpp"

namespace {

struct Fixture {
  gfs::SurfelSet surfels;
  std::vector<gfs::Rgb> colors;
  gfs::Camera camera;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    Fixture x;
    gfs::ShapeDesc sphere;
    x.surfels = gfs::surfel_cover(sphere, 4000, gfs::Rgb(0.6, 0.5, 0.4), 1);
    x.colors.assign(x.surfels.size(), gfs::Rgb(0.6, 0.5, 0.4));
    x.camera = gfs::Camera::look_at(gfs::Vec3(0, -4, 1), gfs::Vec3::Zero(), gfs::Vec3::UnitZ(), 128,
                                    128, 40.0);
    return x;
  }();
  return f;
}

void BM_Render(benchmark::State& state) {
  const auto& f = fixture();
  gfs::RenderOptions opts;
  opts.composite.mode = state.range(0) ? gfs::CompositeMode::kClassic : gfs::CompositeMode::kRefined;
  opts.keep_cache = false;
  opts.workers = 1;
  for (auto _ : state) benchmark::DoNotOptimize(gfs::render(f.camera, f.surfels, f.colors, opts));
}
BENCHMARK(BM_Render)->Arg(0)->Arg(1)->ArgName("classic")->Unit(benchmark::kMillisecond);

void BM_RenderBackward(benchmark::State& state) {
  const auto& f = fixture();
  gfs::RenderOptions opts;
  opts.workers = 1;
  const auto buf = gfs::render(f.camera, f.surfels, f.colors, opts);
  gfs::PixelGradients up;
  up.color.assign(buf.color.size(), 1e-3);
  for (auto _ : state) benchmark::DoNotOptimize(gfs::backward(f.camera, f.surfels, buf, up, opts));
}
BENCHMARK(BM_RenderBackward)->Unit(benchmark::kMillisecond);

}  // namespace
