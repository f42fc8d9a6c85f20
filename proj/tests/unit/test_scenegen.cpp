#include <cmath>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "gfs/errors.hpp"
#include "gfs/renderer.hpp"
#include "gfs/scenegen.hpp"
#include "test_support.hpp"

namespace gfs {
namespace {

SceneSpec small_spec() {
  SceneSpec s;
  s.ring.count = 4;
  s.ring.width = s.ring.height = 24;
  s.supersample = 2;
  return s;
}

TEST(Ring, CamerasLookAtTarget) {
  RingSpec r;
  r.count = 12;
  r.target = Vec3(0.1, -0.2, 0.3);
  const auto cams = make_ring(r);
  ASSERT_EQ(cams.size(), 12u);
  for (const auto& c : cams) {
    EXPECT_NO_THROW(c.validate());
    const Vec3 to = (r.target - c.origin()).normalized();
    EXPECT_LE((c.forward() - to).norm(), 1e-9);
    EXPECT_NEAR((c.origin() - r.target).norm(), r.radius, 1e-9);
    const auto px = c.project(r.target);
    ASSERT_TRUE(px.has_value());
    EXPECT_NEAR(px->x(), c.cx, 1e-9);
    EXPECT_NEAR(px->y(), c.cy, 1e-9);
  }
}

TEST(Scene, Deterministic) {
  const auto a = make_scene(small_spec());
  const auto b = make_scene(small_spec());
  ASSERT_EQ(a.data.views.size(), b.data.views.size());
  for (std::size_t i = 0; i < a.data.views.size(); ++i) {
    EXPECT_EQ(a.data.views[i].image.data, b.data.views[i].image.data);
  }
}

TEST(Scene, ShapesAgreeWithDistance) {
  for (ShapeKind k : {ShapeKind::kSphere, ShapeKind::kBox, ShapeKind::kStep, ShapeKind::kDisk}) {
    ShapeDesc s;
    s.kind = k;
    for (const auto& p : s.sample(500, 1)) EXPECT_LE(s.distance(p), 1e-9);
    const auto [lo, hi] = s.bounds();
    EXPECT_TRUE((lo.array() < hi.array()).any());
    EXPECT_GT(s.area(), 0.0);
  }
}

TEST(Dataset, RoundTrip) {
  const auto dir = test::temp_dir("dataset");
  const auto scene = make_scene(small_spec());
  save_dataset(dir.string(), scene);
  const auto back = load_dataset(dir.string());
  ASSERT_EQ(back.data.views.size(), scene.data.views.size());
  for (std::size_t i = 0; i < back.data.views.size(); ++i) {
    const auto& a = scene.data.views[i];
    const auto& b = back.data.views[i];
    EXPECT_EQ(a.image.data, b.image.data);
    EXPECT_LE((a.camera.rotation - b.camera.rotation).norm(), 1e-12);
    EXPECT_LE((a.camera.translation - b.camera.translation).norm(), 1e-12);
    EXPECT_EQ(a.camera.fx, b.camera.fx);
  }
  EXPECT_EQ(scene_spec_to_json(back.spec), scene_spec_to_json(scene.spec));
}

TEST(Dataset, MissingImageNamesFile) {
  const auto dir = test::temp_dir("dataset_missing");
  save_dataset(dir.string(), make_scene(small_spec()));
  std::filesystem::remove(dir / "images" / "002.png");
  try {
    load_dataset(dir.string());
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("002.png"), std::string::npos) << e.what();
  }
}

TEST(Dataset, CameraFileVersionChecked) {
  const auto dir = test::temp_dir("cameras");
  const std::string path = (dir / "cameras.txt").string();
  write_cameras(path, make_ring(RingSpec{}), std::vector<std::string>(24, "x.png"));
  std::vector<std::string> names;
  EXPECT_EQ(read_cameras(path, &names).size(), 24u);
  EXPECT_EQ(names.front(), "x.png");
  std::ofstream(path) << "version 7\nviews 0\n";
  EXPECT_THROW(read_cameras(path, &names), IoError);
  EXPECT_THROW(read_cameras((dir / "absent.txt").string(), &names), IoError);
}

TEST(SceneSpec, JsonRoundTripAndErrors) {
  SceneSpec s;
  s.shape.kind = ShapeKind::kStep;
  s.color.model = ColorModel::kSpecularProbe;
  s.ring.count = 7;
  s.seed = 99;
  const auto text = scene_spec_to_json(s);
  EXPECT_EQ(scene_spec_to_json(scene_spec_from_json(text)), text);
  EXPECT_THROW(scene_spec_from_json(R"({"version": 2})"), ConfigError);
  EXPECT_THROW(scene_spec_from_json(R"({"color": {"model": "glossy"}})"), ConfigError);
}

TEST(SurfelCover, SilhouetteMatchesAnalyticWithinOnePixel) {
  SceneSpec spec;
  spec.ring.count = 2;
  spec.ring.width = spec.ring.height = 64;
  const auto cover = surfel_cover(spec.shape, 20000, Rgb(0.5, 0.5, 0.5), 3);
  for (const auto& s : cover) EXPECT_NO_THROW(validate_surfel(s));
  for (const Camera& cam : make_ring(spec.ring)) {
    const std::vector<Rgb> colors(cover.size(), Rgb(0.5, 0.5, 0.5));
    RenderOptions opts;
    opts.keep_cache = false;
    const auto buf = render(cam, cover, colors, opts);
    const int w = cam.width, h = cam.height;
    auto inside = [&](int x, int y) { return spec.shape.intersect(cam.pixel_ray(x, y)).has_value(); };
    int mismatches = 0;
    for (int y = 1; y + 1 < h; ++y)
      for (int x = 1; x + 1 < w; ++x) {
        const bool covered = buf.transmittance[std::size_t(y) * w + x] < 0.5;
        if (covered == inside(x, y)) continue;
        ++mismatches;
        bool near_edge = false;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) near_edge |= inside(x + dx, y + dy) == covered;
        EXPECT_TRUE(near_edge) << "pixel " << x << "," << y;
      }
    EXPECT_LT(mismatches, 4 * w);
  }
}

TEST(SpecularProbe, HighlightAtMirrorDirectionAndMovesWithView) {
  SceneSpec spec;
  spec.color.model = ColorModel::kSpecularProbe;
  spec.color.albedo = Rgb::Zero();
  spec.color.ambient = 0.0;
  spec.color.specular = 1.0;
  spec.color.shininess = 200.0;
  spec.ring.count = 2;
  spec.ring.alternate_elevation = false;
  spec.ring.width = spec.ring.height = 96;
  spec.supersample = 1;
  const Vec3 l = spec.color.light.normalized();
  std::vector<Vec2> peaks;
  for (const Camera& cam : make_ring(spec.ring)) {
    const Image img = render_analytic(spec, cam);
    double best = -1.0;
    Vec2 at = Vec2::Zero();
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        if (img.at(x, y, 0) > best) {
          best = img.at(x, y, 0);
          at = Vec2(x + 0.5, y + 0.5);
        }
    ASSERT_GT(best, 0.5);
    // Mirror point: the normal bisects the light and the reversed view ray.
    Vec3 n = (l - cam.forward()).normalized();
    for (int it = 0; it < 20; ++it) {
      const Vec3 d = (spec.shape.center + spec.shape.radius * n - cam.origin()).normalized();
      n = (l - d).normalized();
    }
    const auto expected = cam.project(spec.shape.center + spec.shape.radius * n);
    ASSERT_TRUE(expected.has_value());
    EXPECT_LE((*expected - at).norm(), 1.5);
    peaks.push_back(at);
  }
  EXPECT_GT((peaks[0] - peaks[1]).norm(), 2.0);
}

TEST(SceneSpec, Validation) {
  SceneSpec s;
  s.ring.count = 0;
  EXPECT_THROW(s.validate(), ConfigError);
  s = {};
  s.shape.radius = -1.0;
  EXPECT_THROW(s.validate(), ConfigError);
}

}  // namespace
}  // namespace gfs
