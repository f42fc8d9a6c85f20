#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "gfs/errors.hpp"
#include "gfs/losses.hpp"
#include "gfs/renderer.hpp"
#include "test_support.hpp"

namespace gfs {
namespace {

std::vector<double> noise(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

TEST(Ssim, IdenticalImagesScoreOne) {
  const auto x = noise(12 * 9 * 3, 1);
  EXPECT_NEAR(ssim(x, x, 12, 9, 3), 1.0, 1e-12);
  const auto y = noise(12 * 9 * 3, 2);
  EXPECT_LT(ssim(x, y, 12, 9, 3), 0.5);
}

TEST(LossRgb, GradientMatchesFiniteDifference) {
  const int w = 10, h = 8, c = 3;
  auto x = noise(w * h * c, 3);
  const auto y = noise(w * h * c, 4);
  const auto l = loss_rgb(x, y, w, h, c, 0.2);
  for (std::size_t i = 0; i < x.size(); i += 17) {
    const double e = 1e-6, keep = x[i];
    x[i] = keep + e;
    const double p = loss_rgb(x, y, w, h, c, 0.2).value;
    x[i] = keep - e;
    const double m = loss_rgb(x, y, w, h, c, 0.2).value;
    x[i] = keep;
    EXPECT_NEAR(l.grad[i], (p - m) / (2 * e), 1e-7);
  }
}

TEST(LossRgb, ShapeMismatchThrows) {
  const auto x = noise(12, 1);
  const auto y = noise(9, 1);
  EXPECT_THROW(loss_rgb(x, y, 2, 2, 3), ContractViolation);
}

TEST(Distortion, MatchesPairwiseSum) {
  const Camera cam = test::small_camera(6, 6);
  const SurfelSet s = test::random_surfels(30, 11, 0.3);
  const std::vector<Rgb> c(s.size(), Rgb::Ones());
  const auto buf = render(cam, s, c, RenderOptions{});
  const auto l = loss_depth_distortion(buf);
  double total = 0.0;
  for (std::size_t p = 0; p < buf.pixels(); ++p) {
    const auto e = buf.cache.pixel(p);
    for (const auto& a : e)
      for (const auto& b : e) total += a.weight * b.weight * std::abs(a.t - b.t);
  }
  EXPECT_NEAR(l.value, total / double(buf.pixels()), 1e-12);
}

TEST(NormalConsistency, PlaneFacingCameraIsZero) {
  const Camera cam = test::small_camera(12, 12);
  SurfelSet s = {test::facing_surfel(2.0, 4.28, 5.0)};
  const std::vector<Rgb> c = {Rgb::Ones()};
  const auto buf = render(cam, s, c, RenderOptions{});
  const auto l = loss_normal_consistency(buf, cam);
  EXPECT_GT(l.valid_pixels, 0u);
  EXPECT_NEAR(l.value, 0.0, 1e-9);
}

TEST(NormalConsistency, DegenerateBuffersAreMasked) {
  const Camera cam = test::small_camera(8, 8);
  const SurfelSet s;
  const auto buf = render(cam, s, std::vector<Rgb>{}, RenderOptions{});
  const auto l = loss_normal_consistency(buf, cam);
  EXPECT_EQ(l.valid_pixels, 0u);
  EXPECT_EQ(l.value, 0.0);
}

// Full chain: losses -> upstream gradients -> backward, against finite
// differences of the scalar total loss.
TEST(TotalLoss, EndToEndGradientMatchesFiniteDifference) {
  const Camera cam = test::small_camera(8, 8);
  SurfelSet s = test::random_surfels(12, 21, 0.25, 2.5);
  for (auto& x : s) {
    x.scale_u += 0.3;
    x.scale_v += 0.3;
  }
  Image target(8, 8, 3);
  target.data = noise(8 * 8 * 3, 5);
  LossConfig lc;
  lc.lambda1 = 10.0;
  lc.lambda2 = 0.5;
  RenderOptions o;
  auto eval = [&](const SurfelSet& ss) {
    const auto shaded = shade_surfels(cam, ss, nullptr);
    const auto buf = render(cam, ss, shaded.colors, o);
    return total_loss(buf, cam, target, lc, nullptr).total;
  };
  const auto shaded = shade_surfels(cam, s, nullptr);
  const auto buf = render(cam, s, shaded.colors, o);
  PixelGradients up;
  total_loss(buf, cam, target, lc, &up);
  auto g = backward(cam, s, buf, up, o);
  int checked = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    SurfelSet p = s, m = s;
    const double h = 1e-6 * s[i].weight;
    p[i].weight += h;
    m[i].weight -= h;
    const double fd = (eval(p) - eval(m)) / (2 * h);
    if (std::abs(fd) < 1e-6) continue;
    EXPECT_NEAR(g.weight[i], fd, 1e-3 * std::abs(fd)) << "surfel " << i;
    for (int a = 0; a < 3; ++a) {
      SurfelSet cp = s, cm = s;
      cp[i].center[a] += 1e-6;
      cm[i].center[a] -= 1e-6;
      const double fc = (eval(cp) - eval(cm)) / 2e-6;
      EXPECT_NEAR(g.center[i][a], fc, 1e-3 * std::abs(fc) + 1e-6) << "surfel " << i << " axis " << a;
    }
    ++checked;
  }
  EXPECT_GT(checked, 3);
}

TEST(LossConfig, Validation) {
  LossConfig c;
  EXPECT_NO_THROW(c.validate());
  c.rgb_mix = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.lambda1 = -1.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

}  // namespace
}  // namespace gfs
