#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "gfs/errors.hpp"
#include "gfs/optimizer.hpp"
#include "gfs/renderer.hpp"
#include "test_support.hpp"

namespace gfs {
namespace {

Dataset tiny_dataset() {
  Dataset d;
  for (int i = 0; i < 3; ++i) {
    View v;
    v.camera = test::small_camera(10, 10);
    v.camera.translation = Vec3(0.1 * i, -0.05 * i, 0.0);
    v.image = Image(10, 10, 3, 0.0);
    for (int y = 0; y < 10; ++y)
      for (int x = 0; x < 10; ++x) {
        v.image.at(x, y, 0) = 0.1 * (x % 5);
        v.image.at(x, y, 1) = 0.5;
        v.image.at(x, y, 2) = 0.08 * (y % 7);
      }
    d.views.push_back(v);
  }
  return d;
}

FitConfig quick_config(int iterations) {
  FitConfig c;
  c.iterations = iterations;
  c.distortion_from = 0;
  c.normal_from = 0;
  c.loss.lambda1 = 10.0;
  c.loss.lambda2 = 0.05;
  c.workers = 1;
  c.seed = 42;
  return c;
}

Scene tiny_scene() {
  Scene s;
  s.surfels = test::random_surfels(25, 8, 0.5, 3.0);
  return s;
}

bool same_surfels(const SurfelSet& a, const SurfelSet& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].center != b[i].center || a[i].tangent_u != b[i].tangent_u ||
        a[i].tangent_v != b[i].tangent_v || a[i].scale_u != b[i].scale_u ||
        a[i].scale_v != b[i].scale_v || a[i].weight != b[i].weight) {
      return false;
    }
    const auto x = attr_values(a[i].color), y = attr_values(b[i].color);
    if (!std::equal(x.begin(), x.end(), y.begin(), y.end())) return false;
  }
  return true;
}

TEST(Init, ReproducibleAndScaled) {
  const Vec3 lo(-1, -1, -1), hi(1, 1, 1);
  const auto a = init_surfels(lo, hi, 50, 3, ColorKind::kSh);
  const auto b = init_surfels(lo, hi, 50, 3, ColorKind::kSh);
  EXPECT_TRUE(same_surfels(a, b));
  for (const auto& s : a) {
    EXPECT_NO_THROW(validate_surfel(s));
    EXPECT_NEAR(s.scale_u, 0.02 * (hi - lo).norm(), 1e-15);
    EXPECT_EQ(s.weight, 0.5);
    EXPECT_TRUE((s.center.array() >= lo.array()).all() && (s.center.array() <= hi.array()).all());
  }
  const auto one = init_surfels(lo, hi, 1, 9, ColorKind::kLatent);
  EXPECT_EQ(one.size(), 1u);
  EXPECT_EQ(kind_of(one[0].color), ColorKind::kLatent);
}

TEST(Init, FromPointsAndEmptyBounds) {
  const std::vector<Vec3> pts = {Vec3(0, 0, 0), Vec3(1, 2, 3), Vec3(-1, 0, 2)};
  const auto s = init_surfels(Vec3::Zero(), Vec3::Ones(), 99, 1, ColorKind::kSh,
                              InitStrategy::kFromPoints, pts);
  ASSERT_EQ(s.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(s[i].center, pts[i]);
  EXPECT_THROW(init_surfels(Vec3::Ones(), Vec3::Ones(), 5, 1, ColorKind::kSh), ConfigError);
}

TEST(Optimizer, ZeroLearningRatesLeaveSceneUnchanged) {
  FitConfig c = quick_config(5);
  c.lr = {0, 1, 0, 0, 0, 0, 0, 0};
  const Scene s = tiny_scene();
  const auto ck = fit(tiny_dataset(), s, c);
  EXPECT_TRUE(same_surfels(ck.scene.surfels, s.surfels));
}

TEST(Optimizer, SingleSurfelColorConverges) {
  Dataset d;
  View v;
  v.camera = test::small_camera(8, 8);
  v.image = Image(8, 8, 3);
  for (std::size_t p = 0; p < v.image.pixels(); ++p) {
    v.image.data[3 * p] = 0.7;
    v.image.data[3 * p + 1] = 0.25;
    v.image.data[3 * p + 2] = 0.5;
  }
  d.views.push_back(v);
  Scene s;
  s.surfels = {test::facing_surfel(2.0, 10.0, 50.0)};
  s.surfels[0].color = ShColor::from_rgb(Rgb(0.5, 0.5, 0.5));
  FitConfig c = quick_config(500);
  c.lr = {0, 1, 0, 0, 0, 3e-3, 0, 0};
  c.loss.lambda1 = c.loss.lambda2 = 0.0;
  c.blend.mode = BlendMode::kOff;
  Checkpoint start;
  start.scene = s;
  Optimizer opt(c, start);
  auto error = [&] {
    const auto img = render(v.camera, opt.checkpoint().scene.surfels, nullptr, c.render_options()).color_image();
    double worst = 0.0;
    for (std::size_t i = 0; i < img.data.size(); ++i) worst = std::max(worst, std::abs(img.data[i] - v.image.data[i]));
    return worst;
  };
  double best = error();
  for (int i = 0; i < 500; ++i) {
    opt.step(d);
    best = std::min(best, error());
  }
  EXPECT_LE(best, 1e-3);
  // Adam on an L1 objective then hovers within a few step sizes of the target.
  EXPECT_LE(error(), 2e-3);
}

TEST(Optimizer, DeterministicAndParametersStayValid) {
  const auto d = tiny_dataset();
  const FitConfig c = quick_config(30);
  std::vector<double> la, lb;
  const auto a = fit(d, tiny_scene(), c, [&](const LossRecord& r) { la.push_back(r.terms.total); });
  const auto b = fit(d, tiny_scene(), c, [&](const LossRecord& r) { lb.push_back(r.terms.total); });
  EXPECT_EQ(la, lb);
  EXPECT_TRUE(same_surfels(a.scene.surfels, b.scene.surfels));
  for (const auto& s : a.scene.surfels) EXPECT_NO_THROW(validate_surfel(s));
}

TEST(Optimizer, ZeroIterationsEchoInit) {
  const Scene s = tiny_scene();
  const auto ck = fit(tiny_dataset(), s, quick_config(0));
  EXPECT_TRUE(same_surfels(ck.scene.surfels, s.surfels));
  EXPECT_EQ(ck.iteration, 0);
}

TEST(Optimizer, ResumeEqualsStraightThrough) {
  const auto d = tiny_dataset();
  const auto dir = test::temp_dir("resume");
  FitConfig full = quick_config(20);
  const auto straight = fit(d, tiny_scene(), full);

  FitConfig half = quick_config(8);
  const auto part = fit(d, tiny_scene(), half);
  const std::string path = (dir / "ck.gfck").string();
  save_checkpoint(path, part);
  Optimizer opt(full, load_checkpoint(path));
  opt.run(d);
  EXPECT_TRUE(same_surfels(opt.checkpoint().scene.surfels, straight.scene.surfels));
  EXPECT_EQ(opt.checkpoint().state.m, straight.state.m);
  EXPECT_EQ(opt.checkpoint().state.v, straight.state.v);
}

TEST(Optimizer, ConfigHashMismatchRejected) {
  const auto part = fit(tiny_dataset(), tiny_scene(), quick_config(2));
  FitConfig other = quick_config(10);
  other.lr.color *= 2.0;
  EXPECT_THROW(Optimizer(other, part), ConfigError);
}

TEST(Optimizer, LatentSceneTrains) {
  Scene s = tiny_scene();
  for (auto& x : s.surfels) x.color = LatentColor{};
  s.net.emplace(4);
  s.net->init_random(3);
  const auto before = *s.net;
  const auto ck = fit(tiny_dataset(), s, quick_config(5));
  EXPECT_FALSE(std::equal(before.parameters().begin(), before.parameters().end(),
                          ck.scene.net->parameters().begin()));
}

TEST(Optimizer, NonFiniteLossAborts) {
  auto d = tiny_dataset();
  for (auto& v : d.views) v.image.data[5] = std::numeric_limits<double>::quiet_NaN();
  try {
    fit(d, tiny_scene(), quick_config(3));
    FAIL() << "expected DomainError";
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("non-finite"), std::string::npos);
  }
}

TEST(FitConfig, Validation) {
  FitConfig c;
  EXPECT_NO_THROW(c.validate());
  c.blend.mode = BlendMode::kPerRay;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.lr.center = -1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.batch = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(FitConfig, HashIgnoresIterationsAndWorkers) {
  FitConfig a, b;
  b.iterations = 7;
  b.workers = 3;
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.seed = 1;
  EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(PickView, PureFunctionOfSeedAndIteration) {
  EXPECT_EQ(pick_view(5, 10, 0, 24), pick_view(5, 10, 0, 24));
  std::vector<int> hits(24, 0);
  for (int i = 0; i < 2400; ++i) ++hits[pick_view(5, i, 0, 24)];
  for (int h : hits) EXPECT_GT(h, 50);
}

}  // namespace
}  // namespace gfs
