#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "gfs/errors.hpp"
#include "gfs/renderer.hpp"
#include "gfs/surfel.hpp"
#include "test_support.hpp"

namespace gfs {
namespace {

TEST(Surfel, IntersectAtKnownPoint) {
  const Ray ray = make_ray(Vec3::Zero(), Vec3::UnitZ());
  const Surfel s = test::surfel_on_ray(ray, 2.0, Vec3(0.2, 0.1, -1.0), 0.5, 0.3, 0.4, -0.7, 2.0);
  FootprintConfig fp;
  const auto hit = intersect(ray, s, 0.0, kDefaultCutoff, fp);
  ASSERT_TRUE(hit);
  EXPECT_NEAR(hit->t, 2.0, 1e-12);
  EXPECT_NEAR(hit->local_uv.x(), 0.4, 1e-12);
  EXPECT_NEAR(hit->local_uv.y(), -0.7, 1e-12);
  EXPECT_NEAR(hit->f, 2.0 * std::exp(-0.5 * (0.16 + 0.49)), 1e-12);
  EXPECT_NEAR(hit->rho, footprint(hit->f, fp), 1e-15);
}

TEST(Surfel, ParallelRayMisses) {
  Surfel s;
  s.center = Vec3(0, 0, 2);
  s.weight = 1.0;
  s.tangent_u = Vec3::UnitX();
  s.tangent_v = Vec3::UnitZ();  // plane contains the ray direction
  const Ray ray = make_ray(Vec3::Zero(), Vec3::UnitZ());
  EXPECT_FALSE(intersect(ray, s, 0.0, kDefaultCutoff, FootprintConfig{}));
}

TEST(Surfel, CutoffAndNearClip) {
  const Ray ray = make_ray(Vec3::Zero(), Vec3::UnitZ());
  FootprintConfig fp;
  const Surfel far = test::surfel_on_ray(ray, 2.0, -Vec3::UnitZ(), 0.1, 0.1, 3.1, 0.0, 1.0);
  EXPECT_FALSE(intersect(ray, far, 0.0, 3.0, fp));
  const Surfel near = test::surfel_on_ray(ray, 0.5, -Vec3::UnitZ(), 0.1, 0.1, 0.0, 0.0, 1.0);
  EXPECT_FALSE(intersect(ray, near, 1.0, 3.0, fp));
}

TEST(Surfel, MergeCoincidentSumsFootprints) {
  FootprintConfig fp;
  std::vector<IntersectionRecord> recs(3);
  const double fs[] = {0.7, 1.5, 2.2};
  for (int i = 0; i < 3; ++i) {
    recs[i].surfel = i;
    recs[i].t = 1.0;
    recs[i].f = fs[i];
    recs[i].rho = footprint(fs[i], fp);
  }
  const auto merged = merge_coincident(recs, fp, 1e-9);
  ASSERT_EQ(merged.size(), 1u);
  EXPECT_EQ(merged[0].members, 3u);
  EXPECT_NEAR(merged[0].rho, recs[0].rho + recs[1].rho + recs[2].rho, 1e-14);
  EXPECT_NEAR(merged[0].f, oplus(oplus(0.7, 1.5, fp), 2.2, fp), 1e-9);
}

TEST(Surfel, MergedCompositingIsPermutationInvariant) {
  FootprintConfig fp;
  CompositeConfig cc;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.2, 3.0);
  std::vector<IntersectionRecord> recs(4);
  std::vector<Rgb> colors(4, Rgb(0.3, 0.6, 0.9));
  for (int i = 0; i < 4; ++i) {
    recs[i].surfel = i;
    recs[i].t = 2.0;
    recs[i].f = u(rng);
    recs[i].rho = footprint(recs[i].f, fp);
  }
  const auto base = merge_coincident(recs, colors, fp, 1e-9);
  const auto ref = composite_refined(base.records, base.colors, cc);
  std::vector<int> perm = {0, 1, 2, 3};
  while (std::next_permutation(perm.begin(), perm.end())) {
    std::vector<IntersectionRecord> p;
    for (int i : perm) p.push_back(recs[i]);
    const auto m = merge_coincident(p, colors, fp, 1e-9);
    const auto r = composite_refined(m.records, m.colors, cc);
    EXPECT_NEAR((r.color - ref.color).norm(), 0.0, 1e-14);
  }
}

TEST(Surfel, IntersectAllSortsByDepth) {
  const Ray ray = make_ray(Vec3::Zero(), Vec3::UnitZ());
  SurfelSet s = {test::facing_surfel(3.0, 1.0), test::facing_surfel(1.0, 1.0),
                 test::facing_surfel(2.0, 1.0)};
  const auto recs = intersect_all(ray, s, 0.0, kDefaultCutoff, FootprintConfig{});
  ASSERT_EQ(recs.size(), 3u);
  EXPECT_EQ(recs[0].surfel, 1u);
  EXPECT_EQ(recs[1].surfel, 2u);
  EXPECT_EQ(recs[2].surfel, 0u);
}

TEST(Surfel, ValidationRejectsBadFrames) {
  Surfel s;
  EXPECT_NO_THROW(validate_surfel(s));
  s.tangent_v = Vec3(0.0, 1.0, 0.1);
  EXPECT_THROW(validate_surfel(s), DomainError);
  s = Surfel{};
  s.scale_u = 0.0;
  EXPECT_THROW(validate_surfel(s), DomainError);
  s = Surfel{};
  s.weight = -1.0;
  EXPECT_THROW(validate_surfel(s), DomainError);
}

TEST(Surfel, GeometryFieldAtCenter) {
  FootprintConfig fp;
  SurfelSet s = {test::facing_surfel(1.0, 2.0)};
  EXPECT_NEAR(geometry_field(Vec3(0, 0, 1), s, fp), 2.0 - fp.c, 1e-12);
}

TEST(Surfel, MakeRayRejectsZeroDirection) {
  EXPECT_THROW(make_ray(Vec3::Zero(), Vec3::Zero()), DomainError);
}

}  // namespace
}  // namespace gfs
