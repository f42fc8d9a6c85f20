#include "gfs/pipeline.hpp"

#include <cmath>
#include <limits>

#include "gfs/errors.hpp"

namespace gfs {

Scene initial_scene(const ShapeDesc& shape, std::size_t surfels, ColorKind color,
                    int encoding_degree, std::uint64_t seed) {
  const auto [lo, hi] = shape.bounds();
  Scene scene;
  scene.surfels = init_surfels(lo, hi, surfels, seed, color);
  if (color == ColorKind::kLatent) {
    scene.net.emplace(encoding_degree);
    scene.net->init_random(splitmix64(seed ^ 0x6e6574ull));
  }
  return scene;
}

Mesh extract_mesh(std::span<const Surfel> surfels, std::span<const Camera> cameras,
                  const RenderOptions& render_opts, const MeshingConfig& cfg, const Vec3& lo,
                  const Vec3& hi) {
  cfg.fusion.validate();
  const double pad = cfg.margin * (hi - lo).norm();
  TsdfGrid grid = TsdfGrid::covering(lo - Vec3::Constant(pad), hi + Vec3::Constant(pad),
                                     cfg.fusion.resolution);
  const double truncation = cfg.fusion.truncation_voxels * grid.voxel;
  RenderOptions opts = render_opts;
  opts.keep_cache = false;
  opts.per_ray_blend_tau.reset();
  const std::vector<Rgb> colors(surfels.size(), Rgb::Zero());
  for (const Camera& cam : cameras) {
    const RenderBuffers buf = render(cam, surfels, colors, opts);
    std::vector<std::uint8_t> valid(buf.pixels());
    for (std::size_t p = 0; p < valid.size(); ++p) {
      valid[p] = buf.depth_valid[p] && buf.weight_sum[p] >= cfg.fusion.min_pixel_weight;
    }
    integrate(grid, buf.depth, valid, cam, truncation);
  }
  Mesh mesh = marching_cubes(grid);
  if (cfg.clean && !mesh.empty()) mesh = remove_unobserved(mesh, cameras);
  return mesh;
}

MeshMetrics evaluate_mesh(const Mesh& mesh, const ShapeDesc& truth, std::size_t samples,
                          std::uint64_t seed) {
  if (mesh.empty()) throw DomainError("cannot evaluate an empty mesh");
  if (samples == 0) throw ConfigError("sample count must be positive");
  MeshMetrics m;
  m.samples = samples;
  m.triangles = mesh.triangles.size();
  const auto a = sample_mesh(mesh, samples, seed);
  const auto b = truth.sample(samples, splitmix64(seed));
  m.chamfer = chamfer(a, b);
  double sum = 0.0;
  for (const Vec3& v : mesh.vertices) sum += std::abs(truth.distance(v));
  m.mean_surface_distance = sum / double(mesh.vertices.size());
  return m;
}

double psnr(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height || a.channels != b.channels) {
    throw ContractViolation("psnr: image shapes differ");
  }
  double se = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) se += (a.data[i] - b.data[i]) * (a.data[i] - b.data[i]);
  const double mse = se / double(a.data.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return -10.0 * std::log10(mse);
}

double mean_psnr(const Dataset& data, const Scene& scene, std::span<const ColorAttr> attrs,
                 const RenderOptions& render_opts) {
  if (data.views.empty()) throw ConfigError("dataset has no views");
  RenderOptions opts = render_opts;
  opts.keep_cache = false;
  const ShadingNet* net = scene.net ? &*scene.net : nullptr;
  double sum = 0.0;
  for (const View& v : data.views) {
    const ShadedSurfels shaded = shade_surfels(v.camera, scene.surfels, net, attrs);
    sum += psnr(render(v.camera, scene.surfels, shaded.colors, opts).color_image(), v.image);
  }
  return sum / double(data.views.size());
}

}  // namespace gfs
