#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gfs/geometry.hpp"
#include "gfs/mathkernel.hpp"
#include "gfs/shading.hpp"

namespace gfs {

inline constexpr double kDefaultCutoff = 3.0;
inline constexpr double kParallelEps = 1e-9;

/// Planar 2D Gaussian kernel: center, orthonormal tangent frame, two scales
/// (standard deviations along the tangents), geometry-field amplitude and a
/// color attribute.
struct Surfel {
  Vec3 center = Vec3::Zero();
  Vec3 tangent_u = Vec3::UnitX();
  Vec3 tangent_v = Vec3::UnitY();
  double scale_u = 1.0;
  double scale_v = 1.0;
  double weight = 0.0;
  ColorAttr color = ShColor{};
  std::uint32_t id = 0;

  Vec3 normal() const { return tangent_u.cross(tangent_v); }
};

using SurfelSet = std::vector<Surfel>;

/// Throws DomainError when the frame is not orthonormal, a scale is not
/// positive, or the weight is negative.
void validate_surfel(const Surfel& s);

/// Gram-Schmidt on (tangent_u, tangent_v).
void orthonormalize_frame(Surfel& s);

/// Diagonal of the axis-aligned box around all surfel centers.
double scene_diagonal(std::span<const Surfel> surfels);

struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ();

  Vec3 at(double t) const { return origin + t * direction; }
};

/// Normalizes `direction`; throws DomainError for a zero direction.
Ray make_ray(const Vec3& origin, const Vec3& direction);

struct IntersectionRecord {
  std::uint32_t surfel = 0;    // index into the surfel span
  double t = 0.0;
  double f = 0.0;              // w * G(x(t))
  double rho = 0.0;            // footprint; sum of member footprints after merging
  double cos_theta = 0.0;      // |omega . n|
  Vec2 local_uv = Vec2::Zero();
  std::uint32_t members = 1;   // >1 for merged coincident runs
};

/// Ray-surfel hit. Returns nullopt when t <= near_clip, the ray is parallel
/// to the plane, or the hit lies beyond `cutoff` Mahalanobis units.
std::optional<IntersectionRecord> intersect(const Ray& ray, const Surfel& s, double near_clip,
                                            double cutoff, const FootprintConfig& fp);

/// F(x) = (+)_i w_i G_i(x) - c over the surfels whose plane contains x.
double geometry_field(const Vec3& x, std::span<const Surfel> surfels, const FootprintConfig& fp);

/// All hits sorted by t, with coincident runs merged.
std::vector<IntersectionRecord> intersect_all(const Ray& ray, std::span<const Surfel> surfels,
                                              double near_clip, double cutoff,
                                              const FootprintConfig& fp);

struct MergedRecords {
  std::vector<IntersectionRecord> records;
  std::vector<Rgb> colors;
  /// Index of the first input record of each output record.
  std::vector<std::size_t> first_member;
  /// Runs whose members had different colors (blended by footprint weight).
  std::size_t mixed_color_runs = 0;
};

/// Collapses runs with |t_i - t_j| <= tie_tol into a single record whose
/// footprint is the sum of the member footprints and whose kernel value is
/// f_1 (+) f_2 (+) ... . Input must be sorted by t.
MergedRecords merge_coincident(std::span<const IntersectionRecord> records,
                               std::span<const Rgb> colors, const FootprintConfig& fp,
                               double tie_tol);

/// Color-free overload.
std::vector<IntersectionRecord> merge_coincident(std::span<const IntersectionRecord> records,
                                                 const FootprintConfig& fp, double tie_tol);

/// Tie tolerance for a scene: 1e-9 times its bounding-box diagonal (at least
/// 1e-12).
double tie_tolerance(std::span<const Surfel> surfels);

// Surfel set files. The binary layout is columnar little-endian:
//   char[4] "GFSS" | u32 version | u64 count | u32 color_kind | u32 color_dim
//   | u32 scalar_bytes (4 or 8)
//   then arrays: center[3N] tangent_u[3N] tangent_v[3N] scale_u[N] scale_v[N]
//   weight[N] id[N] (u32) color[dim*N]
void write_surfels_binary(const std::string& path, std::span<const Surfel> surfels,
                          bool double_precision = false);
SurfelSet read_surfels_binary(const std::string& path);
void write_surfels_binary(std::ostream& out, std::span<const Surfel> surfels,
                          bool double_precision);
SurfelSet read_surfels_binary(std::istream& in);

/// Human-readable JSON form for small scenes.
void write_surfels_text(const std::string& path, std::span<const Surfel> surfels);
SurfelSet read_surfels_text(const std::string& path);

}  // namespace gfs
