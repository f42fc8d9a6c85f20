#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "gfs/colorprop.hpp"
#include "gfs/errors.hpp"
#include "gfs/spatial_grid.hpp"
#include "test_support.hpp"

namespace gfs {
namespace {

std::vector<Vec3> cloud(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<Vec3> p(n);
  for (auto& x : p) x = Vec3(g(rng), 0.3 * g(rng), 2.0 * g(rng));
  return p;
}

TEST(SpatialGrid, KnnMatchesBruteForce) {
  const auto pts = cloud(700, 3);
  const SpatialGrid grid(pts);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 1.5);
  for (int q = 0; q < 100; ++q) {
    const Vec3 query(g(rng), g(rng), g(rng));
    std::vector<std::pair<double, std::uint32_t>> all;
    for (std::uint32_t i = 0; i < pts.size(); ++i) all.push_back({(pts[i] - query).norm(), i});
    std::sort(all.begin(), all.end());
    const auto nn = grid.knn(query, 7);
    ASSERT_EQ(nn.size(), 7u);
    for (int j = 0; j < 7; ++j) EXPECT_EQ(nn[j].index, all[j].second);
    EXPECT_EQ(grid.nearest(query).index, all[0].second);
  }
}

TEST(SpatialGrid, FlatCloudAndFarQuery) {
  std::vector<Vec3> flat;
  for (int i = 0; i < 20; ++i)
    for (int j = 0; j < 20; ++j) flat.emplace_back(i * 0.1, j * 0.1, 0.0);
  const SpatialGrid grid(flat);
  const auto n = grid.nearest(Vec3(100.0, 100.0, 5.0));
  EXPECT_EQ(n.index, 399u);
}

TEST(Knn, TableIncludesSelfAndTiesByIndex) {
  std::vector<Vec3> p = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(-1, 0, 0), Vec3(0, 0, 0)};
  const auto t = knn(p, 3);
  const auto row = t.neighbors(0);
  EXPECT_EQ(row[0], 0u);
  EXPECT_EQ(row[1], 3u);
  EXPECT_EQ(row[2], 1u);  // equal distance to 1 and 2: lower index first
}

TEST(Knn, TruncatesWhenFewerPoints) {
  std::vector<Vec3> p = {Vec3(0, 0, 0), Vec3(1, 0, 0)};
  const auto t = knn(p, 10);
  EXPECT_TRUE(t.truncated);
  EXPECT_EQ(t.k, 2);
}

TEST(BlendPerRay, ZeroWeightsPassThrough) {
  const std::vector<double> d = {1.0, 2.0}, w = {0.0, 0.0};
  const std::vector<Rgb> c = {Rgb(1, 0, 0), Rgb(0, 1, 0)};
  const auto out = blend_per_ray(d, w, c, 100.0);
  EXPECT_EQ(out[0], c[0]);
  EXPECT_EQ(out[1], c[1]);
}

TEST(BlendPerRay, CoincidentHitsShareColor) {
  const std::vector<double> d = {1.0, 1.0}, w = {2.0, 2.0};
  const std::vector<Rgb> c = {Rgb(1, 0, 0), Rgb(0, 0, 1)};
  const auto out = blend_per_ray(d, w, c, 100.0);
  EXPECT_NEAR((out[0] - Rgb(0.5, 0, 0.5)).norm(), 0.0, 1e-15);
  EXPECT_NEAR((out[1] - out[0]).norm(), 0.0, 1e-15);
}

TEST(BlendSpatial, ConstantColorsAreFixedPoint) {
  SurfelSet s = test::random_surfels(50, 2);
  for (auto& x : s) x.color = ShColor::from_rgb(Rgb(0.3, 0.6, 0.1));
  std::vector<Vec3> c;
  for (const auto& x : s) c.push_back(x.center);
  const auto out = blend_spatial(s, knn(c, 10), 100.0);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto a = attr_values(out[i]);
    const auto b = attr_values(s[i].color);
    for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(a[k], b[k], 1e-14);
  }
}

TEST(BlendSpatial, BackwardIsTranspose) {
  SurfelSet s = test::random_surfels(30, 5);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  for (auto& x : s) {
    ShColor sh;
    for (auto& v : sh.coeffs) v = g(rng);
    x.color = sh;
  }
  std::vector<Vec3> c;
  for (const auto& x : s) c.push_back(x.center);
  const auto table = knn(c, 6);
  const int dim = kShColorCoeffs;
  std::vector<double> up(s.size() * dim);
  for (auto& v : up) v = g(rng);
  const auto down = blend_spatial_backward(s, table, 100.0, up, dim);
  // <up, B x> == <B^T up, x> for the linear blend B.
  const auto bx = blend_spatial(s, table, 100.0);
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto b = attr_values(bx[i]);
    const auto x = attr_values(s[i].color);
    for (int k = 0; k < dim; ++k) {
      lhs += up[i * dim + k] * b[k];
      rhs += down[i * dim + k] * x[k];
    }
  }
  EXPECT_NEAR(lhs, rhs, 1e-10 * std::abs(lhs));
}

TEST(BlendSpatial, MismatchedTableIsContractViolation) {
  SurfelSet s = test::random_surfels(10, 1);
  std::vector<Vec3> c(5, Vec3::Zero());
  EXPECT_THROW(blend_spatial(s, knn(c, 3), 100.0), ContractViolation);
}

TEST(BlendConfig, Validation) {
  BlendConfig b;
  EXPECT_NO_THROW(b.validate());
  b.k = 0;
  EXPECT_THROW(b.validate(), ConfigError);
  b = {};
  b.tau = -1.0;
  EXPECT_THROW(b.validate(), ConfigError);
}

}  // namespace
}  // namespace gfs
