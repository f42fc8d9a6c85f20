#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gfs/camera.hpp"
#include "gfs/geometry.hpp"
#include "gfs/optimizer.hpp"
#include "gfs/surfel.hpp"

namespace gfs {

enum class ShapeKind { kSphere, kBox, kStep, kDisk };

/// Analytic surface. Sphere: center, radius. Box: center, half_extent.
/// Disk: center, radius, normal (open, two-sided). Step: two unit-half-width
/// squares (lower at center.z for x < center.x, upper at center.z + height)
/// joined by a vertical riser, all spanning half_extent.x/y.
struct ShapeDesc {
  ShapeKind kind = ShapeKind::kSphere;
  Vec3 center = Vec3::Zero();
  double radius = 1.0;
  Vec3 half_extent = Vec3::Ones();
  Vec3 normal = Vec3::UnitZ();
  double height = 0.5;

  void validate() const;

  struct Hit {
    double t;
    Vec3 normal;  // facing the ray origin
  };
  std::optional<Hit> intersect(const Ray& ray) const;

  /// Unsigned distance from p to the surface.
  double distance(const Vec3& p) const;

  double area() const;

  /// Area-uniform samples.
  std::vector<Vec3> sample(std::size_t count, std::uint64_t seed) const;

  /// Axis-aligned bounds of the surface.
  std::pair<Vec3, Vec3> bounds() const;
};

enum class ColorModel { kConstant, kShSky, kSpecularProbe };

struct ColorSpec {
  ColorModel model = ColorModel::kConstant;
  Rgb albedo = Rgb(0.7, 0.5, 0.3);
  Vec3 light = Vec3(0.3, -0.5, -0.8);  // direction toward the light (normalized on use)
  double ambient = 0.35;
  double specular = 0.6;
  double shininess = 40.0;

  /// Radiance leaving surface point with normal n toward a camera whose ray
  /// direction (camera -> point) is d.
  Rgb shade(const Vec3& n, const Vec3& d) const;
};

struct RingSpec {
  int count = 24;
  double radius = 4.0;
  double elevation_deg = 30.0;
  bool alternate_elevation = true;  // odd views use -elevation
  int width = 128;
  int height = 128;
  double fov_y_deg = 40.0;
  double near_clip = 0.05;
  Vec3 target = Vec3::Zero();
};

struct SceneSpec {
  ShapeDesc shape;
  ColorSpec color;
  RingSpec ring;
  int supersample = 4;
  bool surfel_cover = false;   // render targets from a surfel cover instead
  std::size_t cover_count = 20000;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Ring cameras looking at ring.target with world up +z.
std::vector<Camera> make_ring(const RingSpec& ring);

/// Dense surfel cover of the shape (sphere and disk) with constant colors.
SurfelSet surfel_cover(const ShapeDesc& shape, std::size_t count, const Rgb& color,
                       std::uint64_t seed);

/// Analytic, supersampled, 8-bit quantized rendering of one view.
Image render_analytic(const SceneSpec& spec, const Camera& camera);

struct SyntheticScene {
  SceneSpec spec;
  Dataset data;
};

/// Deterministic given spec.seed.
SyntheticScene make_scene(const SceneSpec& spec);

/// Directory layout: cameras.txt, images/NNN.png, truth.json.
void save_dataset(const std::string& dir, const SyntheticScene& scene);
SyntheticScene load_dataset(const std::string& dir);

/// Camera file alone (used by load_dataset).
void write_cameras(const std::string& path, const std::vector<Camera>& cameras,
                   const std::vector<std::string>& images);
std::vector<Camera> read_cameras(const std::string& path, std::vector<std::string>* images);

// JSON descriptor helpers.
std::string scene_spec_to_json(const SceneSpec& spec);
SceneSpec scene_spec_from_json(const std::string& text);

}  // namespace gfs
