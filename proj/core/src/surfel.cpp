#include "gfs/surfel.hpp"

#include <algorithm>
#include <cmath>

#include "gfs/errors.hpp"

namespace gfs {

void validate_surfel(const Surfel& s) {
  if (!(s.scale_u > 0.0) || !(s.scale_v > 0.0)) {
    throw DomainError("surfel: scales must be positive");
  }
  if (!(s.weight >= 0.0)) throw DomainError("surfel: weight must be non-negative");
  if (std::abs(s.tangent_u.norm() - 1.0) > 1e-9 || std::abs(s.tangent_v.norm() - 1.0) > 1e-9 ||
      std::abs(s.tangent_u.dot(s.tangent_v)) > 1e-9) {
    throw DomainError("surfel: tangent frame is not orthonormal");
  }
  if (!s.center.allFinite()) throw DomainError("surfel: non-finite center");
}

void orthonormalize_frame(Surfel& s) {
  Vec3 u = s.tangent_u.normalized();
  Vec3 v = s.tangent_v - s.tangent_v.dot(u) * u;
  if (v.norm() < 1e-12) v = any_orthogonal(u);
  s.tangent_u = u;
  s.tangent_v = v.normalized();
}

double scene_diagonal(std::span<const Surfel> surfels) {
  if (surfels.empty()) return 0.0;
  Vec3 lo = surfels.front().center, hi = lo;
  for (const auto& s : surfels) {
    lo = lo.cwiseMin(s.center);
    hi = hi.cwiseMax(s.center);
  }
  return (hi - lo).norm();
}

double tie_tolerance(std::span<const Surfel> surfels) {
  return std::max(1e-9 * scene_diagonal(surfels), 1e-12);
}

Ray make_ray(const Vec3& origin, const Vec3& direction) {
  const double len = direction.norm();
  if (!(len > 0.0) || !std::isfinite(len)) throw DomainError("ray: zero direction");
  return Ray{origin, direction / len};
}

std::optional<IntersectionRecord> intersect(const Ray& ray, const Surfel& s, double near_clip,
                                            double cutoff, const FootprintConfig& fp) {
  if (!(s.scale_u > 0.0) || !(s.scale_v > 0.0)) {
    throw DomainError("intersect: degenerate surfel scale");
  }
  const Vec3 n = s.normal();
  const double denom = ray.direction.dot(n);
  if (std::abs(denom) < kParallelEps) return std::nullopt;
  const double t = (s.center - ray.origin).dot(n) / denom;
  if (!(t > near_clip)) return std::nullopt;

  const Vec3 p = ray.origin + t * ray.direction - s.center;
  const double u = p.dot(s.tangent_u) / s.scale_u;
  const double v = p.dot(s.tangent_v) / s.scale_v;
  const double r2 = u * u + v * v;
  if (r2 > cutoff * cutoff) return std::nullopt;

  IntersectionRecord rec;
  rec.t = t;
  rec.f = s.weight * std::exp(-0.5 * r2);
  rec.rho = footprint(rec.f, fp);
  rec.cos_theta = std::min(1.0, std::abs(denom));
  rec.local_uv = Vec2(u, v);
  return rec;
}

double geometry_field(const Vec3& x, std::span<const Surfel> surfels, const FootprintConfig& fp) {
  if (!x.allFinite()) throw DomainError("geometry_field: non-finite point");
  bool any = false;
  double acc = 0.0;
  for (const auto& s : surfels) {
    const Vec3 d = x - s.center;
    const double off_plane = d.dot(s.normal());
    if (std::abs(off_plane) > 1e-6 * std::min(s.scale_u, s.scale_v)) continue;
    const double u = d.dot(s.tangent_u) / s.scale_u;
    const double v = d.dot(s.tangent_v) / s.scale_v;
    const double f = s.weight * std::exp(-0.5 * (u * u + v * v));
    acc = any ? oplus(acc, f, fp) : f;
    any = true;
  }
  return acc - fp.c;
}

MergedRecords merge_coincident(std::span<const IntersectionRecord> records,
                               std::span<const Rgb> colors, const FootprintConfig& fp,
                               double tie_tol) {
  if (!colors.empty() && colors.size() != records.size()) {
    throw ContractViolation("merge_coincident: colors and records differ in length");
  }
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i].t < records[i - 1].t) throw ContractViolation("merge_coincident: unsorted");
  }

  MergedRecords out;
  out.records.reserve(records.size());
  std::size_t i = 0;
  while (i < records.size()) {
    std::size_t j = i + 1;
    while (j < records.size() && records[j].t - records[i].t <= tie_tol) ++j;

    IntersectionRecord merged = records[i];
    Rgb color = colors.empty() ? Rgb::Zero() : colors[i];
    if (j - i > 1) {
      double rho = 0.0, t_sum = 0.0;
      Rgb weighted = Rgb::Zero();
      bool mixed = false;
      for (std::size_t k = i; k < j; ++k) {
        rho += records[k].rho;
        t_sum += records[k].t;
        if (!colors.empty()) {
          weighted += records[k].rho * colors[k];
          if (colors[k] != colors[i]) mixed = true;
        }
      }
      merged.members = std::uint32_t(j - i);
      merged.rho = rho;
      merged.t = t_sum / double(j - i);
      merged.f = s_inverse(std::max(rho, geometry_map(0.0, fp)), fp);
      if (!colors.empty()) {
        if (rho > 0.0) {
          color = weighted / rho;
        } else {
          color.setZero();
          for (std::size_t k = i; k < j; ++k) color += colors[k];
          color /= double(j - i);
        }
        if (mixed) ++out.mixed_color_runs;
      }
    }
    out.records.push_back(merged);
    if (!colors.empty()) out.colors.push_back(color);
    out.first_member.push_back(i);
    i = j;
  }
  return out;
}

std::vector<IntersectionRecord> merge_coincident(std::span<const IntersectionRecord> records,
                                                 const FootprintConfig& fp, double tie_tol) {
  return merge_coincident(records, std::span<const Rgb>{}, fp, tie_tol).records;
}

std::vector<IntersectionRecord> intersect_all(const Ray& ray, std::span<const Surfel> surfels,
                                              double near_clip, double cutoff,
                                              const FootprintConfig& fp) {
  std::vector<IntersectionRecord> hits;
  for (std::size_t i = 0; i < surfels.size(); ++i) {
    if (auto rec = intersect(ray, surfels[i], near_clip, cutoff, fp)) {
      rec->surfel = std::uint32_t(i);
      hits.push_back(*rec);
    }
  }
  std::sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) {
    return a.t < b.t || (a.t == b.t && a.surfel < b.surfel);
  });
  return merge_coincident(hits, fp, tie_tolerance(surfels));
}

}  // namespace gfs
