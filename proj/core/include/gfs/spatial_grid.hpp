#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "gfs/geometry.hpp"

namespace gfs {

/// Uniform hash grid over a fixed point set supporting exact k-nearest
/// queries. Results are ordered by (distance, index); equal distances are
/// broken by the lower index.
class SpatialGrid {
 public:
  SpatialGrid() = default;
  /// `cell` <= 0 picks a size giving a few points per occupied cell.
  explicit SpatialGrid(std::span<const Vec3> points, double cell = 0.0);

  std::size_t size() const { return points_.size(); }
  double cell_size() const { return cell_; }

  struct Neighbor {
    std::uint32_t index;
    double distance;
  };

  /// Exact k nearest points to `query` (all points if fewer than k).
  std::vector<Neighbor> knn(const Vec3& query, std::size_t k) const;

  Neighbor nearest(const Vec3& query) const;

 private:
  using Key = std::uint64_t;
  Key key(std::int64_t x, std::int64_t y, std::int64_t z) const;
  std::array<std::int64_t, 3> cell_of(const Vec3& p) const;

  std::vector<Vec3> points_;
  double cell_ = 1.0;
  Vec3 lo_ = Vec3::Zero();
  std::array<std::int64_t, 3> extent_{};  // occupied cell range per axis
  std::unordered_map<Key, std::vector<std::uint32_t>> cells_;
};

}  // namespace gfs
