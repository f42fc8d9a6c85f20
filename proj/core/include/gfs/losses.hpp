#pragma once

#include <span>
#include <vector>

#include "gfs/camera.hpp"
#include "gfs/image.hpp"
#include "gfs/renderer.hpp"

namespace gfs {

struct LossConfig {
  double lambda1 = 1.0;  // depth distortion, world-unit depths
  double lambda2 = 0.05;    // normal consistency
  double rgb_mix = 0.2;     // weight of (1 - SSIM) in the photometric term

  /// Throws ConfigError for negative weights or a mix outside [0, 1].
  void validate() const;
};

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

/// Scalar loss with a gradient laid out like its input.
struct ScalarLoss {
  double value = 0.0;
  std::vector<double> grad;
};

/// Mean SSIM over pixels and channels: 11x11 Gaussian window (sigma 1.5),
/// zero padding, C1 = 0.01^2, C2 = 0.03^2. Images are interleaved
/// width x height x channels.
double ssim(std::span<const double> x, std::span<const double> y, int width, int height,
            int channels);

/// (1 - mix) * mean |x - y| + mix * (1 - SSIM(x, y)); the gradient is with
/// respect to `rendered`. Throws ContractViolation on a shape mismatch.
ScalarLoss loss_rgb(std::span<const double> rendered, std::span<const double> target, int width,
                    int height, int channels, double mix = 0.2);
ScalarLoss loss_rgb(const Image& rendered, const Image& target, double mix = 0.2);

/// Per-entry loss gradients.
struct EntryLoss {
  double value = 0.0;
  std::vector<double> d_weight;  // per cache entry
  std::vector<double> d_depth;   // per cache entry
};

/// sum_{i,j} w_i w_j |t_i - t_j| over the entries of each pixel (ordered
/// pairs), averaged over all pixels.
EntryLoss loss_depth_distortion(const RenderBuffers& buffers);

struct NormalLoss {
  double value = 0.0;
  std::size_t valid_pixels = 0;
  std::vector<double> d_weight;  // per cache entry
  std::vector<Vec3> d_normal;    // per cache entry
  std::vector<double> d_depth;   // per pixel, d L / d expected depth
};

/// Per pixel, N is the normalized cross product of central differences of
/// the back-projected expected-depth points, turned toward the camera; the
/// loss is sum_i w_i (1 - n_i . N), averaged over pixels whose four
/// neighbors have valid depth and a non-degenerate cross product.
NormalLoss loss_normal_consistency(const RenderBuffers& buffers, const Camera& camera);

/// Depth-derived normal map (zero where masked), for diagnostics.
std::vector<double> depth_normals(const RenderBuffers& buffers, const Camera& camera);

struct LossTerms {
  double rgb = 0.0;
  double distortion = 0.0;
  double normal = 0.0;
  double total = 0.0;
};

/// L = L_rgb + lambda1 L_d + lambda2 L_n. When `grads` is non-null, it
/// receives the upstream gradients for backward. Terms with zero weight are
/// skipped.
LossTerms total_loss(const RenderBuffers& buffers, const Camera& camera, const Image& target,
                     const LossConfig& cfg, PixelGradients* grads);

}  // namespace gfs
