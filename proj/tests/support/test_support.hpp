#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "gfs/camera.hpp"
#include "gfs/shading.hpp"
#include "gfs/surfel.hpp"

namespace gfs::test {

/// Surfel with the given normal whose plane crosses `ray` at depth t, hit
/// landing at local coordinates (u, v).
inline Surfel surfel_on_ray(const Ray& ray, double t, const Vec3& normal, double su, double sv,
                            double u, double v, double weight) {
  Surfel s;
  const Vec3 n = normal.normalized();
  s.tangent_u = any_orthogonal(n);
  s.tangent_v = n.cross(s.tangent_u);
  s.scale_u = su;
  s.scale_v = sv;
  s.weight = weight;
  s.center = ray.at(t) - (u * su) * s.tangent_u - (v * sv) * s.tangent_v;
  return s;
}

/// Fronto-parallel surfel facing -z at depth z on the optical axis.
inline Surfel facing_surfel(double z, double weight, double scale = 0.5) {
  Surfel s;
  s.center = Vec3(0.0, 0.0, z);
  s.scale_u = s.scale_v = scale;
  s.weight = weight;
  return s;
}

inline Camera pixel_camera() {
  Camera c;
  c.fx = c.fy = 1.0;
  c.cx = c.cy = 0.5;
  c.width = c.height = 1;
  return c;
}

inline Camera small_camera(int w = 16, int h = 16) {
  Camera c;
  c.width = w;
  c.height = h;
  c.fx = c.fy = 0.9 * w;
  c.cx = 0.5 * w;
  c.cy = 0.5 * h;
  return c;
}

inline SurfelSet random_surfels(std::size_t n, std::uint64_t seed, double spread = 0.5,
                                double depth = 3.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SurfelSet out;
  for (std::size_t i = 0; i < n; ++i) {
    Surfel s;
    s.center = Vec3(spread * g(rng), spread * g(rng), depth + spread * g(rng));
    Vec3 nrm(0.3 * g(rng), 0.3 * g(rng), -1.0);
    nrm.normalize();
    s.tangent_u = any_orthogonal(nrm);
    s.tangent_v = nrm.cross(s.tangent_u);
    s.scale_u = 0.1 + 0.3 * u(rng);
    s.scale_v = 0.1 + 0.3 * u(rng);
    s.weight = 0.5 + 3.0 * u(rng);
    s.color = ShColor::from_rgb(Rgb(u(rng), u(rng), u(rng)));
    s.id = std::uint32_t(i);
    out.push_back(s);
  }
  return out;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("gfs_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace gfs::test
