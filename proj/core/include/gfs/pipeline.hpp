#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gfs/fusion.hpp"
#include "gfs/optimizer.hpp"
#include "gfs/scenegen.hpp"

namespace gfs {

/// Random surfels inside the shape bounds; latent scenes also get a seeded
/// shading net with the given encoding degree.
Scene initial_scene(const ShapeDesc& shape, std::size_t surfels, ColorKind color,
                    int encoding_degree, std::uint64_t seed);

struct MeshingConfig {
  FusionConfig fusion;
  double margin = 0.1;  // grid padding as a fraction of the box diagonal
  bool clean = true;    // drop triangles no camera sees
};

/// Renders expected depth for every camera, fuses it over the padded box
/// [lo, hi] and extracts the zero level set.
Mesh extract_mesh(std::span<const Surfel> surfels, std::span<const Camera> cameras,
                  const RenderOptions& render, const MeshingConfig& cfg, const Vec3& lo,
                  const Vec3& hi);

struct MeshMetrics {
  ChamferResult chamfer;
  double mean_surface_distance = 0.0;  // mean |analytic distance| of mesh vertices
  std::size_t samples = 0;
  std::size_t triangles = 0;
};

/// Symmetric Chamfer between area-weighted samples of the mesh and of the
/// analytic surface (`samples` points each).
MeshMetrics evaluate_mesh(const Mesh& mesh, const ShapeDesc& truth, std::size_t samples,
                          std::uint64_t seed);

/// Peak signal-to-noise ratio in dB for images in [0, 1].
double psnr(const Image& a, const Image& b);

/// Mean PSNR of the scene's renders over the dataset views.
double mean_psnr(const Dataset& data, const Scene& scene, std::span<const ColorAttr> attrs,
                 const RenderOptions& render);

}  // namespace gfs
