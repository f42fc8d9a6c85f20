#include "gfs/spatial_grid.hpp"

#include <algorithm>
#include <cmath>

#include "gfs/errors.hpp"

namespace gfs {

namespace {

double distance(const Vec3& a, const Vec3& b) {
  const double dx = a.x() - b.x(), dy = a.y() - b.y(), dz = a.z() - b.z();
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

bool closer(const SpatialGrid::Neighbor& a, const SpatialGrid::Neighbor& b) {
  return a.distance < b.distance || (a.distance == b.distance && a.index < b.index);
}

}  // namespace

SpatialGrid::SpatialGrid(std::span<const Vec3> points, double cell)
    : points_(points.begin(), points.end()) {
  if (points_.empty()) return;
  Vec3 lo = points_.front(), hi = points_.front();
  for (const auto& p : points_) {
    if (!p.allFinite()) throw DomainError("SpatialGrid: non-finite point");
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  if (cell <= 0.0) {
    const Vec3 ext = hi - lo;
    const double diag = ext.norm();
    // Aim for about two points per cell over the occupied box, treating flat
    // axes as a tenth of the diagonal so planar sets do not collapse the volume.
    const double floor_len = std::max(diag * 0.1, 1e-12);
    const double vol = std::max(ext.x(), floor_len) * std::max(ext.y(), floor_len) *
                       std::max(ext.z(), floor_len);
    cell = std::cbrt(2.0 * vol / double(points_.size()));
    if (!(cell > 0.0) || !std::isfinite(cell)) cell = 1.0;
  }
  cell_ = cell;
  lo_ = lo;
  const auto top = cell_of(hi);
  extent_ = top;
  for (std::uint32_t i = 0; i < points_.size(); ++i) {
    const auto c = cell_of(points_[i]);
    cells_[key(c[0], c[1], c[2])].push_back(i);
  }
}

SpatialGrid::Key SpatialGrid::key(std::int64_t x, std::int64_t y, std::int64_t z) const {
  return (Key(x) * Key(extent_[1] + 1) + Key(y)) * Key(extent_[2] + 1) + Key(z);
}

std::array<std::int64_t, 3> SpatialGrid::cell_of(const Vec3& p) const {
  std::array<std::int64_t, 3> c;
  // Clamped so far-away queries cannot overflow; the ring bound stays valid
  // because clamping only moves the query cell toward the box.
  for (int a = 0; a < 3; ++a) {
    c[a] = std::int64_t(std::clamp(std::floor((p[a] - lo_[a]) / cell_), -1e15, 1e15));
  }
  return c;
}

std::vector<SpatialGrid::Neighbor> SpatialGrid::knn(const Vec3& query, std::size_t k) const {
  std::vector<Neighbor> found;
  if (points_.empty() || k == 0) return found;
  k = std::min(k, points_.size());
  const auto q = cell_of(query);
  // Rings are clipped to the occupied cell box, so a query far outside it
  // starts at the first ring that reaches the box.
  std::int64_t first_ring = 0, max_ring = 0;
  for (int a = 0; a < 3; ++a) {
    first_ring = std::max({first_ring, -q[a], q[a] - extent_[a]});
    max_ring = std::max({max_ring, std::abs(q[a]), std::abs(extent_[a] - q[a])});
  }

  auto visit = [&](std::int64_t x, std::int64_t y, std::int64_t z) {
    if (z < 0 || z > extent_[2]) return;
    const auto it = cells_.find(key(x, y, z));
    if (it == cells_.end()) return;
    for (std::uint32_t i : it->second) found.push_back({i, distance(query, points_[i])});
  };

  for (std::int64_t r = first_ring; r <= max_ring; ++r) {
    const std::int64_t x0 = std::max<std::int64_t>(0, q[0] - r), x1 = std::min(extent_[0], q[0] + r);
    const std::int64_t y0 = std::max<std::int64_t>(0, q[1] - r), y1 = std::min(extent_[1], q[1] + r);
    const std::int64_t z0 = std::max<std::int64_t>(0, q[2] - r), z1 = std::min(extent_[2], q[2] + r);
    for (std::int64_t x = x0; x <= x1; ++x) {
      for (std::int64_t y = y0; y <= y1; ++y) {
        if (std::abs(x - q[0]) == r || std::abs(y - q[1]) == r) {
          for (std::int64_t z = z0; z <= z1; ++z) visit(x, y, z);
        } else {
          visit(x, y, q[2] - r);
          if (r > 0) visit(x, y, q[2] + r);
        }
      }
    }
    if (found.size() >= k) {
      // Cells outside ring r lie at least r * cell away from the query.
      std::nth_element(found.begin(), found.begin() + (k - 1), found.end(), closer);
      if (found[k - 1].distance <= double(r) * cell_) break;
    }
  }
  std::sort(found.begin(), found.end(), closer);
  found.resize(k);
  return found;
}

SpatialGrid::Neighbor SpatialGrid::nearest(const Vec3& query) const {
  if (points_.empty()) throw ContractViolation("SpatialGrid::nearest: empty grid");
  return knn(query, 1).front();
}

}  // namespace gfs
