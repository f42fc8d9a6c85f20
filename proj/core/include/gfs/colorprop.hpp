#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gfs/geometry.hpp"
#include "gfs/surfel.hpp"

namespace gfs {

enum class BlendMode { kOff, kPerRay, kSpatial };

struct BlendConfig {
  double tau = 100.0;
  int k = 10;
  int refresh_interval = 100;
  BlendMode mode = BlendMode::kSpatial;

  void validate() const;
};

/// Per-ray blending over the hits of one ray:
///   c^_i = sum_j (1 - e^{-w_j}) e^{-tau |t_j - t_i|} c_j / (same without c_j)
/// `weights` are the surfel geometry weights w_j. Rays whose weights are all
/// zero pass colors through unchanged.
std::vector<Rgb> blend_per_ray(std::span<const double> depths, std::span<const double> weights,
                               std::span<const Rgb> colors, double tau);

/// Each center's k nearest centers (itself included), ordered by
/// (distance, index).
struct NeighborTable {
  int k = 0;
  std::vector<std::uint32_t> index;  // size n * k
  std::vector<double> distance;      // size n * k
  /// Set when fewer than k centers were available.
  bool truncated = false;

  std::size_t size() const { return k > 0 ? index.size() / std::size_t(k) : 0; }
  std::span<const std::uint32_t> neighbors(std::size_t i) const {
    return {index.data() + i * std::size_t(k), std::size_t(k)};
  }
  std::span<const double> distances(std::size_t i) const {
    return {distance.data() + i * std::size_t(k), std::size_t(k)};
  }
};

/// Exact k-NN via a hash grid.
NeighborTable knn(std::span<const Vec3> centers, int k);

/// Spatial propagation: blends each surfel's color attribute (SH coefficients
/// or latent) over its neighbor row with weights
/// (1 - e^{-w_j}) e^{-tau ||m_i - m_j||}. Throws ContractViolation for a
/// table that does not match the surfel count or has empty rows.
std::vector<ColorAttr> blend_spatial(std::span<const Surfel> surfels, const NeighborTable& table,
                                     double tau);

/// Transpose of blend_spatial with the blend weights held fixed: maps
/// gradients of blended attributes (n * dim) to gradients of the inputs.
std::vector<double> blend_spatial_backward(std::span<const Surfel> surfels,
                                           const NeighborTable& table, double tau,
                                           std::span<const double> blended_grad, int dim);

}  // namespace gfs
