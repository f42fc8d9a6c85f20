#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "gfs/errors.hpp"
#include "gfs/shading.hpp"

namespace gfs {
namespace {

std::vector<Vec3> fibonacci_sphere(int n) {
  std::vector<Vec3> out;
  const double golden = M_PI * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - 2.0 * (i + 0.5) / n;
    const double r = std::sqrt(1.0 - z * z);
    out.emplace_back(r * std::cos(golden * i), r * std::sin(golden * i), z);
  }
  return out;
}

TEST(Shading, ShBasisIsOrthonormal) {
  const int degree = 5;
  const int m = sh_basis_count(degree);
  ASSERT_EQ(m, 25);
  const auto dirs = fibonacci_sphere(200000);
  std::vector<double> gram(std::size_t(m) * m, 0.0);
  for (const Vec3& d : dirs) {
    const auto y = sh_encode_direction(d, degree);
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b) gram[a * m + b] += y[a] * y[b];
  }
  const double w = 4.0 * M_PI / dirs.size();
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b) EXPECT_NEAR(gram[a * m + b] * w, a == b ? 1.0 : 0.0, 2e-3);
}

TEST(Shading, BasisCounts) {
  EXPECT_EQ(sh_basis_count(1), 1);
  EXPECT_EQ(sh_basis_count(4), 16);
  EXPECT_THROW(sh_encode_direction(Vec3::UnitZ(), 6), DomainError);
  EXPECT_THROW(sh_encode_direction(Vec3(0, 0, 2), 4), DomainError);
}

TEST(Shading, EncodeGradientMatchesFiniteDifference) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const Vec3 d = Vec3(g(rng), g(rng), g(rng)).normalized();
    std::vector<double> vals(25);
    std::vector<Vec3> grads(25);
    sh_encode_with_grad(d, 5, vals, grads);
    // Tangent directions keep the FD on the sphere.
    const Vec3 t1 = any_orthogonal(d), t2 = d.cross(t1);
    for (const Vec3& t : {t1, t2}) {
      const double h = 1e-6;
      const auto p = sh_encode_direction((d + h * t).normalized(), 5);
      const auto q = sh_encode_direction((d - h * t).normalized(), 5);
      for (int k = 0; k < 25; ++k) {
        EXPECT_NEAR(grads[k].dot(t), (p[k] - q[k]) / (2 * h), 1e-6);
      }
    }
  }
}

TEST(Shading, FromRgbIsViewIndependent) {
  const ShColor c = ShColor::from_rgb(Rgb(0.2, 0.5, 0.8));
  for (const Vec3& eye : {Vec3(3, 0, 0), Vec3(0, -2, 1), Vec3(1, 1, 1)}) {
    const Rgb v = eval_color(c, Vec3::Zero(), eye, Vec3::UnitZ(), nullptr);
    EXPECT_NEAR((v - Rgb(0.2, 0.5, 0.8)).norm(), 0.0, 1e-12);
  }
}

TEST(Shading, ShColorIsClamped) {
  const ShColor c = ShColor::from_rgb(Rgb(1.7, -0.4, 0.5));
  const Rgb v = eval_color(c, Vec3::Zero(), Vec3(0, 0, 3), Vec3::UnitZ(), nullptr);
  EXPECT_EQ(v[0], 1.0);
  EXPECT_EQ(v[1], 0.0);
}

TEST(Shading, ReflectIsMirror) {
  const Vec3 n = Vec3(0, 0, 1);
  const Vec3 w = Vec3(1, 0, 1).normalized();
  EXPECT_NEAR((reflect(w, n) - Vec3(-1, 0, 1).normalized()).norm(), 0.0, 1e-15);
}

TEST(Shading, LatentWithoutNetThrows) {
  EXPECT_THROW(eval_color(LatentColor{}, Vec3::Zero(), Vec3(0, 0, 2), Vec3::UnitZ(), nullptr),
               ConfigError);
}

TEST(Shading, LatentBackwardMatchesFiniteDifference) {
  ShadingNet net(4);
  net.init_random(17);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  LatentColor lc;
  for (auto& x : lc.latent) x = 0.5 * g(rng);
  ColorAttr attr = lc;
  const Vec3 center(0.1, -0.2, 0.3), eye(0.5, 0.4, 3.0);
  const Vec3 normal = Vec3(0.2, 0.1, 1.0).normalized();
  const Rgb up(0.3, -0.7, 0.5);
  auto loss = [&](const ColorAttr& a, const ShadingNet& n, const Vec3& c, const Vec3& nrm) {
    return up.dot(eval_color(a, c, eye, nrm, &n));
  };
  ShadingCache cache;
  eval_color(attr, center, eye, normal, &net, &cache);
  ShadingGrad sg;
  std::vector<double> net_grad(net.parameter_count(), 0.0);
  eval_color_backward(attr, cache, up, &net, sg, net_grad);
  const double h = 1e-6;
  for (int k = 0; k < kLatentDim; k += 3) {
    ColorAttr p = attr, q = attr;
    attr_values(p)[k] += h;
    attr_values(q)[k] -= h;
    EXPECT_NEAR(sg.attr[k], (loss(p, net, center, normal) - loss(q, net, center, normal)) / (2 * h), 1e-7);
  }
  for (std::size_t k = 0; k < net.parameter_count(); k += 97) {
    ShadingNet p = net, q = net;
    p.parameters()[k] += h;
    q.parameters()[k] -= h;
    EXPECT_NEAR(net_grad[k], (loss(attr, p, center, normal) - loss(attr, q, center, normal)) / (2 * h), 1e-7);
  }
  for (int a = 0; a < 3; ++a) {
    Vec3 cp = center, cm = center;
    cp[a] += h;
    cm[a] -= h;
    EXPECT_NEAR(sg.center[a], (loss(attr, net, cp, normal) - loss(attr, net, cm, normal)) / (2 * h), 1e-6);
  }
}

TEST(Shading, ShBackwardIsBasisTimesUpstream) {
  ShColor c;
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  for (auto& x : c.coeffs) x = u(rng);
  ColorAttr attr = c;
  ShadingCache cache;
  const Vec3 center(0, 0, 0), eye(0.3, -1.0, 2.0);
  eval_color(attr, center, eye, Vec3::UnitZ(), nullptr, &cache);
  ShadingGrad sg;
  eval_color_backward(attr, cache, Rgb(1, 0, 0), nullptr, sg, {});
  const auto y = sh_encode_direction(cache.omega, 4);
  for (int k = 0; k < kShColorBasis; ++k) EXPECT_NEAR(sg.attr[k * 3], y[k], 1e-12);
  EXPECT_EQ(sg.attr[1], 0.0);
}

TEST(Shading, NetInitIsSeeded) {
  ShadingNet a(4), b(4), c(4);
  a.init_random(1);
  b.init_random(1);
  c.init_random(2);
  EXPECT_TRUE(std::equal(a.parameters().begin(), a.parameters().end(), b.parameters().begin()));
  EXPECT_FALSE(std::equal(a.parameters().begin(), a.parameters().end(), c.parameters().begin()));
}

}  // namespace
}  // namespace gfs
