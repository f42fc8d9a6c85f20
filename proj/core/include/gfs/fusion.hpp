#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gfs/camera.hpp"
#include "gfs/geometry.hpp"

namespace gfs {

/// Truncated signed distance volume. Values are normalized by the truncation
/// distance and lie in [-1, 1]; positive in front of the observed surface.
struct TsdfGrid {
  std::array<int, 3> resolution{0, 0, 0};
  double voxel = 0.0;
  Vec3 origin = Vec3::Zero();  // center of voxel (0, 0, 0)
  std::vector<float> tsdf;
  std::vector<float> weight;

  /// Cubic grid with `resolution` voxels per axis covering [lo, hi] (the
  /// longest side sets the voxel size). Throws ConfigError for an empty box
  /// or resolution < 2.
  static TsdfGrid covering(const Vec3& lo, const Vec3& hi, int resolution);

  std::size_t index(int i, int j, int k) const {
    return (std::size_t(k) * resolution[1] + j) * resolution[0] + i;
  }
  Vec3 position(int i, int j, int k) const { return origin + voxel * Vec3(i, j, k); }
  std::size_t size() const { return tsdf.size(); }
};

struct FusionConfig {
  int resolution = 128;
  double truncation_voxels = 4.0;
  double min_pixel_weight = 0.5;  // accumulated blending weight for a depth to count

  void validate() const;
};

/// Fuses one expected-depth map (distance along each pixel's unit ray).
/// Pixels with valid[p] == 0 are skipped. Returns false, leaving the grid
/// untouched, when no voxel lies in front of the camera.
bool integrate(TsdfGrid& grid, std::span<const double> depth, std::span<const std::uint8_t> valid,
               const Camera& camera, double truncation);

struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::uint32_t, 3>> triangles;

  bool empty() const { return triangles.empty(); }
  double area() const;
};

struct MeshReport {
  std::size_t boundary_edges = 0;      // edges used by one triangle
  std::size_t nonmanifold_edges = 0;   // edges used by more than two
  std::size_t degenerate_triangles = 0;
};

/// Marching cubes over voxels with weight > 0. Vertices are shared along
/// cell edges; triangles are wound so their normals point toward positive
/// values. A grid without a sign change yields an empty mesh.
Mesh marching_cubes(const TsdfGrid& grid, double iso = 0.0);

/// Marching cubes over a dense scalar field with unit weights.
Mesh marching_cubes(std::span<const float> values, const std::array<int, 3>& resolution,
                    const Vec3& origin, double voxel, double iso = 0.0);

MeshReport inspect_mesh(const Mesh& mesh);

/// Drops triangles whose centroid lies outside every camera's image, then
/// unused vertices.
Mesh remove_unobserved(const Mesh& mesh, std::span<const Camera> cameras);

/// Area-weighted random surface samples.
std::vector<Vec3> sample_mesh(const Mesh& mesh, std::size_t count, std::uint64_t seed);

struct ChamferResult {
  double a_to_b = 0.0;
  double b_to_a = 0.0;
  double symmetric = 0.0;  // (a_to_b + b_to_a) / 2
};

/// Mean exact nearest-neighbor distances. Throws ContractViolation for an
/// empty set.
ChamferResult chamfer(std::span<const Vec3> a, std::span<const Vec3> b);

// Mesh files. PLY (ascii or binary little-endian) and OBJ.
void write_ply(const std::string& path, const Mesh& mesh, bool binary = true);
Mesh read_ply(const std::string& path);
void write_obj(const std::string& path, const Mesh& mesh);
Mesh read_mesh(const std::string& path);  // by extension

}  // namespace gfs
