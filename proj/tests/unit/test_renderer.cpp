#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "gfs/errors.hpp"
#include "gfs/renderer.hpp"
#include "test_support.hpp"

namespace gfs {
namespace {

std::vector<IntersectionRecord> records_for(std::initializer_list<double> fs) {
  FootprintConfig fp;
  std::vector<IntersectionRecord> out;
  double t = 1.0;
  for (double f : fs) {
    IntersectionRecord r;
    r.surfel = std::uint32_t(out.size());
    r.t = t;
    r.f = f;
    r.rho = footprint(f, fp);
    out.push_back(r);
    t += 1.0;
  }
  return out;
}

TEST(Composite, SingleRecordLinearInColor) {
  CompositeConfig cc;
  const auto recs = records_for({2.0});
  const std::vector<Rgb> c = {Rgb(0.2, 0.4, 0.8)};
  const auto r = composite_refined(recs, c, cc);
  const double alpha = 1.0 - std::exp(-footprint(2.0, cc.footprint));
  EXPECT_NEAR((r.color - alpha * c[0]).norm(), 0.0, 1e-15);
  EXPECT_NEAR(r.weights[0], alpha, 1e-15);
}

TEST(Composite, ClassicUsesKernelValueAsAlpha) {
  CompositeConfig cc;
  const auto recs = records_for({0.5});
  const std::vector<Rgb> c = {Rgb(1, 1, 1)};
  EXPECT_NEAR(composite_classic(recs, c, cc).color[0], 0.5, 1e-15);
  const auto big = records_for({2.0});
  EXPECT_NEAR(composite_classic(big, c, cc).color[0], 0.99, 1e-15);
}

TEST(Composite, ConservationWithoutEarlyExit) {
  CompositeConfig cc;
  cc.early_exit = 0.0;
  cc.alpha_floor = 0.0;
  const auto recs = records_for({0.3, 1.2, 2.5, 4.0, 4.28, 0.9});
  const std::vector<Rgb> c(recs.size(), Rgb(1, 0, 0));
  const auto r = composite_refined(recs, c, cc);
  double sum = r.transmittance;
  for (double w : r.weights) sum += w;
  EXPECT_NEAR(sum, 1.0, 1e-12);
}

TEST(Composite, DepthBracketAndBackground) {
  CompositeConfig cc;
  cc.background = Rgb(0.1, 0.2, 0.3);
  const auto recs = records_for({4.28, 4.28, 4.28});
  const std::vector<Rgb> c(3, Rgb::Zero());
  const auto r = composite_refined(recs, c, cc);
  ASSERT_TRUE(r.depth_valid);
  EXPECT_GE(r.depth, 1.0);
  EXPECT_LE(r.depth, 3.0);
  EXPECT_NEAR((r.color - r.transmittance * cc.background).norm(), 0.0, 1e-15);
}

TEST(Composite, AlphaFloorSkipsFaintRecords) {
  CompositeConfig cc;
  const auto recs = records_for({0.01, 2.0});
  const std::vector<Rgb> c = {Rgb(1, 0, 0), Rgb(0, 1, 0)};
  const auto r = composite_refined(recs, c, cc);
  EXPECT_EQ(r.weights[0], 0.0);
  EXPECT_EQ(r.color[0], 0.0);
}

TEST(Composite, UnsortedInputIsContractViolation) {
  auto recs = records_for({1.0, 1.0});
  std::swap(recs[0].t, recs[1].t);
  const std::vector<Rgb> c(2, Rgb::Ones());
  EXPECT_THROW(composite_refined(recs, c, CompositeConfig{}), ContractViolation);
}

TEST(Render, FacingAwayGivesFullTransmittance) {
  const Camera cam = test::small_camera();
  SurfelSet s = {test::facing_surfel(-3.0, 3.0)};
  const std::vector<Rgb> c = {Rgb::Ones()};
  const auto buf = render(cam, s, c, RenderOptions{});
  for (double t : buf.transmittance) EXPECT_EQ(t, 1.0);
}

TEST(Render, SortModesAgreeOnSeparatedSurfels) {
  const Camera cam = test::small_camera();
  SurfelSet s = {test::facing_surfel(2.0, 2.0, 0.4), test::facing_surfel(3.0, 3.0, 0.8),
                 test::facing_surfel(4.5, 4.0, 1.5)};
  s[1].center.x() = 0.2;
  const std::vector<Rgb> c = {Rgb(1, 0, 0), Rgb(0, 1, 0), Rgb(0, 0, 1)};
  RenderOptions a, b;
  a.sorting = SortMode::kPerRay;
  b.sorting = SortMode::kGlobal;
  const auto ra = render(cam, s, c, a), rb = render(cam, s, c, b);
  EXPECT_EQ(ra.color, rb.color);
  EXPECT_EQ(ra.depth, rb.depth);
}

TEST(Render, InterleavedSurfelsSeparateSortModes) {
  Camera cam = test::small_camera(24, 24);
  // Two strongly tilted planes crossing each other: the per-ray order flips
  // across the image while the center-depth order is fixed.
  Surfel a = test::facing_surfel(3.0, 4.0, 2.0), b = test::facing_surfel(3.05, 4.0, 2.0);
  const Mat3 ra = rotation_from_axis_angle(Vec3(0, 0.6, 0)), rb = rotation_from_axis_angle(Vec3(0, -0.6, 0));
  a.tangent_u = ra * a.tangent_u;
  a.tangent_v = ra * a.tangent_v;
  b.tangent_u = rb * b.tangent_u;
  b.tangent_v = rb * b.tangent_v;
  SurfelSet s = {a, b};
  const std::vector<Rgb> c = {Rgb(1, 0, 0), Rgb(0, 0, 1)};
  RenderOptions per, glob;
  glob.sorting = SortMode::kGlobal;
  const auto rp = render(cam, s, c, per), rg = render(cam, s, c, glob);
  double diff = 0.0;
  for (std::size_t i = 0; i < rp.color.size(); ++i) diff = std::max(diff, std::abs(rp.color[i] - rg.color[i]));
  EXPECT_GT(diff, 1e-2);
}

TEST(Render, MonotoneTransmittanceInCache) {
  const Camera cam = test::small_camera();
  const SurfelSet s = test::random_surfels(60, 3);
  const std::vector<Rgb> c(s.size(), Rgb(0.5, 0.5, 0.5));
  const auto buf = render(cam, s, c, RenderOptions{});
  for (std::size_t p = 0; p < buf.pixels(); ++p) {
    double prev = 1.0;
    for (const auto& e : buf.cache.pixel(p)) {
      EXPECT_LE(e.transmittance_before, prev + 1e-15);
      prev = e.transmittance_before;
    }
  }
}

TEST(Render, WorkerCountDoesNotChangeImage) {
  const Camera cam = test::small_camera(20, 14);
  const SurfelSet s = test::random_surfels(80, 4);
  const std::vector<Rgb> c(s.size(), Rgb(0.2, 0.7, 0.1));
  RenderOptions one, three;
  one.workers = 1;
  three.workers = 3;
  EXPECT_EQ(render(cam, s, c, one).color, render(cam, s, c, three).color);
}

TEST(Backward, MissingCacheIsContractViolation) {
  const Camera cam = test::small_camera();
  const SurfelSet s = test::random_surfels(5, 1);
  const std::vector<Rgb> c(s.size(), Rgb::Ones());
  RenderOptions o;
  o.keep_cache = false;
  const auto buf = render(cam, s, c, o);
  EXPECT_THROW(backward(cam, s, buf, PixelGradients{}, o), ContractViolation);
}

TEST(Backward, ColorGradientIsBlendWeight) {
  const Camera cam = test::pixel_camera();
  SurfelSet s = {test::facing_surfel(2.0, 2.5)};
  const std::vector<Rgb> c = {Rgb(0.3, 0.3, 0.3)};
  RenderOptions o;
  const auto buf = render(cam, s, c, o);
  PixelGradients up;
  up.color = {1.0, 0.0, 0.0};
  const auto g = backward(cam, s, buf, up, o);
  EXPECT_NEAR(g.color[0][0], buf.cache.pixel(0)[0].weight, 1e-15);
  EXPECT_EQ(g.color[0][1], 0.0);
}

TEST(Backward, OccludedSurfelGetsNoGradient) {
  const Camera cam = test::pixel_camera();
  SurfelSet s = {test::facing_surfel(2.0, 4.28), test::facing_surfel(2.5, 4.28),
                 test::facing_surfel(3.0, 4.28), test::facing_surfel(6.0, 2.0)};
  const std::vector<Rgb> c(4, Rgb(0.5, 0.5, 0.5));
  RenderOptions o;
  const auto buf = render(cam, s, c, o);
  PixelGradients up;
  up.color = {1.0, 1.0, 1.0};
  up.depth = {1.0};
  const auto g = backward(cam, s, buf, up, o);
  EXPECT_EQ(g.weight[3], 0.0);
  EXPECT_EQ(g.center[3], Vec3::Zero());
  EXPECT_EQ(g.color[3], Rgb::Zero());
}

TEST(Backward, DeterministicForFixedWorkers) {
  const Camera cam = test::small_camera(12, 12);
  const SurfelSet s = test::random_surfels(40, 6);
  const std::vector<Rgb> c(s.size(), Rgb(0.4, 0.1, 0.9));
  RenderOptions o;
  o.workers = 2;
  const auto buf = render(cam, s, c, o);
  PixelGradients up;
  up.color.assign(buf.color.size(), 0.1);
  up.depth.assign(buf.depth.size(), -0.2);
  const auto a = backward(cam, s, buf, up, o);
  const auto b = backward(cam, s, buf, up, o);
  EXPECT_EQ(a.weight, b.weight);
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_EQ(a.center[i], b.center[i]);
}

TEST(Backward, WeightGradientMatchesFiniteDifference) {
  const Camera cam = test::pixel_camera();
  SurfelSet s = {test::facing_surfel(2.0, 1.3), test::facing_surfel(3.0, 2.1)};
  s[0].center.x() = 0.2;
  const std::vector<Rgb> c = {Rgb(0.9, 0.1, 0.2), Rgb(0.1, 0.8, 0.3)};
  RenderOptions o;
  const Rgb dc(0.7, -0.4, 1.1);
  auto loss = [&](const SurfelSet& ss) {
    const auto b = render(cam, ss, c, o);
    return dc.dot(Rgb(b.color[0], b.color[1], b.color[2]));
  };
  const auto buf = render(cam, s, c, o);
  PixelGradients up;
  up.color = {dc[0], dc[1], dc[2]};
  const auto g = backward(cam, s, buf, up, o);
  for (int i = 0; i < 2; ++i) {
    SurfelSet p = s, m = s;
    const double h = 1e-6 * s[i].weight;
    p[i].weight += h;
    m[i].weight -= h;
    const double fd = (loss(p) - loss(m)) / (2 * h);
    EXPECT_NEAR(g.weight[i], fd, 1e-4 * std::abs(fd) + 1e-10);
  }
}

}  // namespace
}  // namespace gfs
