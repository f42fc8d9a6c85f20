#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "gfs/errors.hpp"
#include "gfs/fusion.hpp"
#include "test_support.hpp"

namespace gfs {
namespace {

// Depth along each pixel ray to the plane z = plane_z.
std::vector<double> plane_depth(const Camera& cam, double plane_z) {
  std::vector<double> d(std::size_t(cam.width) * cam.height);
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      const Ray r = cam.pixel_ray(x, y);
      d[std::size_t(y) * cam.width + x] = (plane_z - r.origin.z()) / r.direction.z();
    }
  return d;
}

double zero_crossing_z(const TsdfGrid& g, int i, int j) {
  for (int k = 0; k + 1 < g.resolution[2]; ++k) {
    const float a = g.tsdf[g.index(i, j, k)], b = g.tsdf[g.index(i, j, k + 1)];
    if (g.weight[g.index(i, j, k)] > 0 && g.weight[g.index(i, j, k + 1)] > 0 && a > 0 && b <= 0) {
      const double s = a / double(a - b);
      return g.position(i, j, k).z() + s * g.voxel;
    }
  }
  return std::nan("");
}

Mesh sphere_mesh(int res, double r, bool flip = false) {
  std::vector<float> v(std::size_t(res) * res * res);
  const double h = 3.0 / (res - 1);
  for (int k = 0; k < res; ++k)
    for (int j = 0; j < res; ++j)
      for (int i = 0; i < res; ++i) {
        const Vec3 p = Vec3(-1.5, -1.5, -1.5) + h * Vec3(i, j, k);
        const double sdf = p.norm() - r;
        v[(std::size_t(k) * res + j) * res + i] = float(flip ? -sdf : sdf);
      }
  return marching_cubes(v, {res, res, res}, Vec3(-1.5, -1.5, -1.5), h);
}

TEST(Tsdf, PlaneZeroCrossingWithinHalfVoxel) {
  TsdfGrid g = TsdfGrid::covering(Vec3(-0.5, -0.5, 1.5), Vec3(0.5, 0.5, 2.5), 40);
  const double plane = 2.0;
  for (int v = 0; v < 5; ++v) {
    Camera cam = test::small_camera(64, 64);
    cam.translation = Vec3(0.05 * v - 0.1, 0.03 * v, 0.0);
    const auto depth = plane_depth(cam, plane);
    const std::vector<std::uint8_t> valid(depth.size(), 1);
    EXPECT_TRUE(integrate(g, depth, valid, cam, 4 * g.voxel));
  }
  const double z = zero_crossing_z(g, 20, 20);
  ASSERT_FALSE(std::isnan(z));
  EXPECT_NEAR(z, plane, 0.5 * g.voxel);
  for (float t : g.tsdf) EXPECT_LE(std::abs(t), 1.0f);
}

TEST(Tsdf, InvalidPixelsLeaveGridUnchanged) {
  TsdfGrid g = TsdfGrid::covering(Vec3(-0.5, -0.5, 1.5), Vec3(0.5, 0.5, 2.5), 16);
  const auto before = g.tsdf;
  const Camera cam = test::small_camera(16, 16);
  const auto depth = plane_depth(cam, 2.0);
  const std::vector<std::uint8_t> valid(depth.size(), 0);
  integrate(g, depth, valid, cam, 4 * g.voxel);
  EXPECT_EQ(g.tsdf, before);
  for (float w : g.weight) EXPECT_EQ(w, 0.0f);
}

TEST(Tsdf, RepeatedViewIsIdempotent) {
  const Camera cam = test::small_camera(48, 48);
  const auto depth = plane_depth(cam, 2.0);
  const std::vector<std::uint8_t> valid(depth.size(), 1);
  TsdfGrid once = TsdfGrid::covering(Vec3(-0.5, -0.5, 1.5), Vec3(0.5, 0.5, 2.5), 24);
  TsdfGrid twice = once;
  integrate(once, depth, valid, cam, 4 * once.voxel);
  integrate(twice, depth, valid, cam, 4 * twice.voxel);
  integrate(twice, depth, valid, cam, 4 * twice.voxel);
  EXPECT_NEAR(zero_crossing_z(once, 12, 12), zero_crossing_z(twice, 12, 12), 1e-6);
}

TEST(Tsdf, CameraFacingAwayIsNoOp) {
  TsdfGrid g = TsdfGrid::covering(Vec3(-0.5, -0.5, -2.5), Vec3(0.5, 0.5, -1.5), 16);
  const Camera cam = test::small_camera(16, 16);
  const std::vector<double> depth(256, 2.0);
  const std::vector<std::uint8_t> valid(256, 1);
  EXPECT_FALSE(integrate(g, depth, valid, cam, 4 * g.voxel));
}

TEST(MarchingCubes, SphereVerticesNearRadiusAndOutward) {
  const int res = 48;
  const double r = 1.0, h = 3.0 / (res - 1);
  const Mesh m = sphere_mesh(res, r);
  ASSERT_FALSE(m.empty());
  double mean = 0.0;
  for (const Vec3& v : m.vertices) {
    EXPECT_NEAR(v.norm(), r, h);
    mean += std::abs(v.norm() - r);
  }
  EXPECT_LT(mean / m.vertices.size(), 0.1 * h);
  for (const auto& t : m.triangles) {
    const Vec3 a = m.vertices[t[0]], b = m.vertices[t[1]], c = m.vertices[t[2]];
    EXPECT_GT((b - a).cross(c - a).dot((a + b + c) / 3.0), 0.0);
  }
  const MeshReport rep = inspect_mesh(m);
  EXPECT_EQ(rep.boundary_edges, 0u);
  EXPECT_EQ(rep.nonmanifold_edges, 0u);
  EXPECT_NEAR(m.area(), 4 * M_PI * r * r, 0.02 * 4 * M_PI);
}

TEST(MarchingCubes, SignFlipReversesOrientation) {
  const Mesh a = sphere_mesh(24, 1.0), b = sphere_mesh(24, 1.0, true);
  ASSERT_EQ(a.triangles.size(), b.triangles.size());
  double sa = 0.0, sb = 0.0;
  for (const auto& t : a.triangles) {
    const Vec3 p = a.vertices[t[0]], q = a.vertices[t[1]], r = a.vertices[t[2]];
    sa += (q - p).cross(r - p).dot(p);
  }
  for (const auto& t : b.triangles) {
    const Vec3 p = b.vertices[t[0]], q = b.vertices[t[1]], r = b.vertices[t[2]];
    sb += (q - p).cross(r - p).dot(p);
  }
  EXPECT_GT(sa, 0.0);
  EXPECT_LT(sb, 0.0);
  EXPECT_NEAR(sa, -sb, 1e-6 * sa);
}

TEST(MarchingCubes, SingleSignGridIsEmpty) {
  std::vector<float> v(8 * 8 * 8, 0.5f);
  EXPECT_TRUE(marching_cubes(v, {8, 8, 8}, Vec3::Zero(), 0.1).empty());
}

TEST(Chamfer, TrivialCases) {
  const std::vector<Vec3> a = {Vec3(0, 0, 0), Vec3(1, 2, 3)};
  EXPECT_EQ(chamfer(a, a).symmetric, 0.0);
  const std::vector<Vec3> p = {Vec3(0, 0, 0)}, q = {Vec3(1, 0, 0)};
  EXPECT_DOUBLE_EQ(chamfer(p, q).symmetric, 1.0);
  EXPECT_THROW(chamfer(p, std::vector<Vec3>{}), ContractViolation);
}

TEST(Chamfer, MatchesBruteForceAndIsSymmetric) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<Vec3> a(300), b(200);
  for (auto& x : a) x = Vec3(g(rng), g(rng), g(rng));
  for (auto& x : b) x = Vec3(g(rng), g(rng), 0.2 * g(rng));
  auto mean_nn = [](const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
    double s = 0.0;
    for (const auto& p : from) {
      double best = 1e300;
      for (const auto& q : to) best = std::min(best, (p - q).norm());
      s += best;
    }
    return s / from.size();
  };
  const auto c = chamfer(a, b);
  EXPECT_NEAR(c.a_to_b, mean_nn(a, b), 1e-12);
  EXPECT_NEAR(c.b_to_a, mean_nn(b, a), 1e-12);
  EXPECT_EQ(c.symmetric, chamfer(b, a).symmetric);
}

TEST(Mesh, SamplesLieOnSurface) {
  const Mesh m = sphere_mesh(32, 1.0);
  const auto pts = sample_mesh(m, 5000, 2);
  ASSERT_EQ(pts.size(), 5000u);
  for (const auto& p : pts) EXPECT_NEAR(p.norm(), 1.0, 0.1);
}

TEST(Mesh, RemoveUnobservedDropsHiddenTriangles) {
  const Mesh m = sphere_mesh(24, 1.0);
  Camera cam = Camera::look_at(Vec3(0, 0, -4), Vec3(0, 0, 0), Vec3(0, 1, 0), 32, 32, 10.0);
  const std::vector<Camera> cams = {cam};
  const Mesh kept = remove_unobserved(m, cams);
  EXPECT_LT(kept.triangles.size(), m.triangles.size());
  EXPECT_GT(kept.triangles.size(), 0u);
}

}  // namespace
}  // namespace gfs
