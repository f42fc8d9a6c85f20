#include "gfs/colorprop.hpp"

#include <cmath>

#include "gfs/errors.hpp"
#include "gfs/parallel.hpp"
#include "gfs/spatial_grid.hpp"

namespace gfs {

void BlendConfig::validate() const {
  if (!(tau > 0.0)) throw ConfigError("blend: tau must be positive");
  if (k < 1) throw ConfigError("blend: k must be at least 1");
  if (refresh_interval < 1) throw ConfigError("blend: refresh_interval must be at least 1");
}

std::vector<Rgb> blend_per_ray(std::span<const double> depths, std::span<const double> weights,
                               std::span<const Rgb> colors, double tau) {
  const std::size_t n = depths.size();
  if (weights.size() != n || colors.size() != n) {
    throw ContractViolation("blend_per_ray: depths, weights and colors differ in length");
  }
  if (!(tau > 0.0)) throw DomainError("blend_per_ray: tau must be positive");
  std::vector<double> occ(n);
  for (std::size_t j = 0; j < n; ++j) occ[j] = -std::expm1(-weights[j]);
  std::vector<Rgb> out(colors.begin(), colors.end());
  for (std::size_t i = 0; i < n; ++i) {
    Rgb num = Rgb::Zero();
    double den = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double w = occ[j] * std::exp(-tau * std::abs(depths[j] - depths[i]));
      num += w * colors[j];
      den += w;
    }
    if (den > 0.0) out[i] = num / den;
  }
  return out;
}

NeighborTable knn(std::span<const Vec3> centers, int k) {
  if (k < 1) throw ContractViolation("knn: k must be at least 1");
  NeighborTable table;
  const std::size_t n = centers.size();
  table.truncated = n < std::size_t(k);
  table.k = table.truncated ? int(n) : k;
  if (n == 0) return table;
  table.index.resize(n * table.k);
  table.distance.resize(n * table.k);
  const SpatialGrid grid(centers);
  parallel_for(n, 0, [&](std::size_t b, std::size_t e, int) {
    for (std::size_t i = b; i < e; ++i) {
      const auto nb = grid.knn(centers[i], std::size_t(table.k));
      for (int j = 0; j < table.k; ++j) {
        table.index[i * table.k + j] = nb[j].index;
        table.distance[i * table.k + j] = nb[j].distance;
      }
    }
  });
  return table;
}

namespace {

void check_table(std::span<const Surfel> surfels, const NeighborTable& table) {
  if (table.k < 1 || table.size() != surfels.size()) {
    throw ContractViolation("blend_spatial: neighbor table does not match the surfel set");
  }
}

// Unnormalized blend weights of row i and their sum. All-zero rows fall back
// to the surfel itself.
double row_weights(std::span<const Surfel> surfels, const NeighborTable& table, double tau,
                   std::size_t i, std::vector<double>& w) {
  const auto nb = table.neighbors(i);
  const auto dist = table.distances(i);
  w.resize(nb.size());
  double den = 0.0;
  for (std::size_t j = 0; j < nb.size(); ++j) {
    w[j] = -std::expm1(-surfels[nb[j]].weight) * std::exp(-tau * dist[j]);
    den += w[j];
  }
  if (den > 0.0) return den;
  for (std::size_t j = 0; j < nb.size(); ++j) w[j] = nb[j] == i ? 1.0 : 0.0;
  return 1.0;
}

}  // namespace

std::vector<ColorAttr> blend_spatial(std::span<const Surfel> surfels, const NeighborTable& table,
                                     double tau) {
  check_table(surfels, table);
  std::vector<ColorAttr> out(surfels.size());
  parallel_for(surfels.size(), 0, [&](std::size_t b, std::size_t e, int) {
    std::vector<double> w;
    for (std::size_t i = b; i < e; ++i) {
      const double den = row_weights(surfels, table, tau, i, w);
      ColorAttr blended = make_attr(kind_of(surfels[i].color));
      auto dst = attr_values(blended);
      const auto nb = table.neighbors(i);
      for (std::size_t j = 0; j < nb.size(); ++j) {
        const auto& src_attr = surfels[nb[j]].color;
        if (kind_of(src_attr) != kind_of(blended)) {
          throw ContractViolation("blend_spatial: mixed color representations");
        }
        const auto src = attr_values(src_attr);
        for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += w[j] * src[c];
      }
      for (auto& x : dst) x /= den;
      out[i] = blended;
    }
  });
  return out;
}

std::vector<double> blend_spatial_backward(std::span<const Surfel> surfels,
                                           const NeighborTable& table, double tau,
                                           std::span<const double> blended_grad, int dim) {
  check_table(surfels, table);
  if (blended_grad.size() != surfels.size() * std::size_t(dim)) {
    throw ContractViolation("blend_spatial_backward: gradient size mismatch");
  }
  std::vector<double> out(blended_grad.size(), 0.0);
  std::vector<double> w;
  for (std::size_t i = 0; i < surfels.size(); ++i) {
    const double den = row_weights(surfels, table, tau, i, w);
    const auto nb = table.neighbors(i);
    for (std::size_t j = 0; j < nb.size(); ++j) {
      const double wj = w[j] / den;
      for (int c = 0; c < dim; ++c) out[nb[j] * std::size_t(dim) + c] += wj * blended_grad[i * dim + c];
    }
  }
  return out;
}

}  // namespace gfs
