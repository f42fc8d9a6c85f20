#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "gfs/camera.hpp"
#include "gfs/image.hpp"
#include "gfs/mathkernel.hpp"
#include "gfs/shading.hpp"
#include "gfs/surfel.hpp"

namespace gfs {

enum class CompositeMode { kRefined, kClassic };
enum class SortMode { kPerRay, kGlobal };

inline constexpr double kEarlyExitTransmittance = 1e-4;
inline constexpr double kAlphaFloor = 1.0 / 255.0;
inline constexpr double kClassicAlphaMax = 0.99;
inline constexpr double kMinDepthWeight = 1e-6;

struct CompositeConfig {
  FootprintConfig footprint;
  CompositeMode mode = CompositeMode::kRefined;
  Rgb background = Rgb::Zero();
  double early_exit = kEarlyExitTransmittance;  // <= 0 disables
  double alpha_floor = kAlphaFloor;              // <= 0 disables
};

struct CompositeResult {
  Rgb color = Rgb::Zero();
  /// Expected depth normalized by the accumulated weight; 0 when invalid.
  double depth = 0.0;
  /// Unnormalized sum_i weight_i t_i.
  double depth_sum = 0.0;
  double weight_sum = 0.0;
  double transmittance = 1.0;
  bool depth_valid = false;
  /// One weight per input record; 0 for skipped records and those past the
  /// early exit.
  std::vector<double> weights;
};

/// Front-to-back compositing with alpha_i = 1 - exp(-rho_i), using each
/// record's `rho` (which carries the summed footprint of merged runs).
/// Throws ContractViolation for unsorted input.
CompositeResult composite_refined(std::span<const IntersectionRecord> records,
                                  std::span<const Rgb> colors, const CompositeConfig& cfg);

/// Classic splatting: alpha_i = min(f_i, 0.99).
CompositeResult composite_classic(std::span<const IntersectionRecord> records,
                                  std::span<const Rgb> colors, const CompositeConfig& cfg);

/// Dispatches on cfg.mode.
CompositeResult composite(std::span<const IntersectionRecord> records,
                          std::span<const Rgb> colors, const CompositeConfig& cfg);

struct RenderOptions {
  CompositeConfig composite;
  SortMode sorting = SortMode::kPerRay;
  double cutoff = kDefaultCutoff;
  /// Per-ray color blending (tau) applied to the hits of each ray before
  /// merging; per-ray sorting only.
  std::optional<double> per_ray_blend_tau;
  bool keep_cache = true;
  int workers = 0;
};

/// One composited entry of a pixel (a single hit or a merged run).
struct PixelEntry {
  std::uint32_t member_begin = 0;
  std::uint32_t member_count = 0;
  double t = 0.0;
  double rho = 0.0;
  double f = 0.0;
  double alpha = 0.0;
  double transmittance_before = 1.0;
  double weight = 0.0;
  Rgb color = Rgb::Zero();
  Vec3 normal = Vec3::Zero();  // leading member's normal, facing the camera
};

struct MemberHit {
  std::uint32_t surfel = 0;
  double t = 0.0;
  double f = 0.0;
  double rho = 0.0;
  Rgb color = Rgb::Zero();
};

/// Per-pixel forward data retained for backward and the losses.
struct ForwardCache {
  bool valid = false;
  bool per_ray_blend = false;
  std::vector<std::size_t> pixel_offset;  // size H*W + 1, into entries
  std::vector<PixelEntry> entries;
  std::vector<MemberHit> members;

  std::span<const PixelEntry> pixel(std::size_t p) const {
    return {entries.data() + pixel_offset[p], pixel_offset[p + 1] - pixel_offset[p]};
  }
};

struct RenderBuffers {
  int width = 0;
  int height = 0;
  std::vector<double> color;          // 3 * H * W
  std::vector<double> depth;          // H * W expected depth, 0 where invalid
  std::vector<double> normal;         // 3 * H * W blended camera-facing normal
  std::vector<double> transmittance;  // H * W
  std::vector<double> weight_sum;     // H * W
  std::vector<std::uint8_t> depth_valid;
  std::size_t mixed_color_runs = 0;
  ForwardCache cache;

  std::size_t pixels() const { return std::size_t(width) * height; }
  Image color_image() const;
  Image depth_image() const;
  Image normal_image() const;
  Image transmittance_image() const;
};

/// Renders with precomputed per-surfel colors.
RenderBuffers render(const Camera& camera, std::span<const Surfel> surfels,
                     std::span<const Rgb> colors, const RenderOptions& options);

/// Per-surfel shading for one view.
struct ShadedSurfels {
  std::vector<Rgb> colors;
  std::vector<ShadingCache> caches;
};

/// Evaluates each surfel's color for the camera. `attrs` overrides the
/// surfels' own color attributes (used for propagated colors).
ShadedSurfels shade_surfels(const Camera& camera, std::span<const Surfel> surfels,
                            const ShadingNet* net, std::span<const ColorAttr> attrs = {});

/// Shades and renders.
RenderBuffers render(const Camera& camera, std::span<const Surfel> surfels, const ShadingNet* net,
                     const RenderOptions& options);

/// Upstream gradients for backward. Empty vectors mean zero.
struct PixelGradients {
  std::vector<double> color;         // 3 * H * W, d L / d C
  std::vector<double> depth;         // H * W, d L / d D
  std::vector<double> entry_weight;  // per cache entry, d L / d weight
  std::vector<double> entry_depth;   // per cache entry, d L / d t
  std::vector<Vec3> entry_normal;    // per cache entry, d L / d normal
};

/// Per-surfel gradient accumulators. `rotation` is the gradient with respect
/// to a world-frame axis-angle increment applied to the tangent frame.
struct GradBuffers {
  std::vector<Vec3> center;
  std::vector<Vec3> rotation;
  std::vector<double> scale_u;
  std::vector<double> scale_v;
  std::vector<double> weight;
  std::vector<Rgb> color;           // d L / d shaded color
  int attr_dim = 0;
  std::vector<double> attr;         // d L / d color attribute (N * attr_dim)
  std::vector<double> net;          // d L / d shading net parameters

  void resize(std::size_t n, int attr_dim, std::size_t net_params);
  void set_zero();
  GradBuffers& operator+=(const GradBuffers& other);
  bool all_finite() const;
};

/// Geometry and color gradients of a render pass. Throws ContractViolation
/// when the buffers carry no forward cache.
GradBuffers backward(const Camera& camera, std::span<const Surfel> surfels,
                     const RenderBuffers& buffers, const PixelGradients& upstream,
                     const RenderOptions& options);

/// Pushes the per-surfel color gradients through shading into attribute,
/// center, frame and net gradients.
void backward_shading(std::span<const Surfel> surfels, const ShadedSurfels& shaded,
                      const ShadingNet* net, std::span<const ColorAttr> attrs, GradBuffers& grads);

}  // namespace gfs
