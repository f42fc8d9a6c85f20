#include "gfs/oracle.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "gfs/errors.hpp"

namespace gfs {

void QuadratureConfig::validate() const {
  if (!(h > 0.0)) throw ConfigError("quadrature: h must be positive");
  if (samples_per_kernel < 64) throw ConfigError("quadrature: samples_per_kernel must be >= 64");
  for (std::size_t i = 0; i < h_sequence.size(); ++i) {
    if (!(h_sequence[i] > 0.0)) throw ConfigError("quadrature: h_sequence must be positive");
    if (i > 0 && !(h_sequence[i] < h_sequence[i - 1])) {
      throw ConfigError("quadrature: h_sequence must be strictly decreasing");
    }
  }
  if (!(tolerance > 0.0)) throw ConfigError("quadrature: tolerance must be positive");
}

std::optional<OracleHit> oracle_hit(const Ray& ray, const Surfel& s, const QuadratureConfig& qc,
                                    const FootprintConfig& fp) {
  const Vec3 n = s.tangent_u.cross(s.tangent_v);
  const double dn = ray.direction.dot(n);
  if (std::abs(dn) < kParallelEps) return std::nullopt;
  const double t = (s.center - ray.origin).dot(n) / dn;
  if (!(t > qc.near_clip)) return std::nullopt;
  const Vec3 x = ray.origin + t * ray.direction - s.center;
  const double u = x.dot(s.tangent_u) / s.scale_u;
  const double v = x.dot(s.tangent_v) / s.scale_v;
  if (u * u + v * v > qc.cutoff * qc.cutoff) return std::nullopt;
  OracleHit hit;
  hit.t = t;
  hit.f = std::min(s.weight * std::exp(-0.5 * (u * u + v * v)), fp.f_max);
  hit.cos_theta = std::min(1.0, std::abs(dn));
  return hit;
}

double extruded_density(double t, const OracleHit& hit, double h, const FootprintConfig& fp) {
  if (!(h > 0.0)) throw DomainError("extruded_density: h must be positive");
  const double half = h / hit.cos_theta;
  const double d = std::abs(t - hit.t);
  if (!(d < half)) return 0.0;
  const double F = hit.f * (1.0 - d / half) - fp.c;
  return normal_pdf_cdf_ratio(-F) * (hit.f / h) * hit.cos_theta;
}

double extruded_density(double t, const Ray& ray, const Surfel& s, double h,
                        const QuadratureConfig& qc, const FootprintConfig& fp) {
  const auto hit = oracle_hit(ray, s, qc, fp);
  if (!hit) return 0.0;
  return extruded_density(t, *hit, h, fp);
}

namespace {

// Composite Simpson on [a, b] with n (even) intervals.
template <class Fn>
double simpson(const Fn& fn, double a, double b, int n) {
  const double step = (b - a) / n;
  double acc = fn(a) + fn(b);
  for (int i = 1; i < n; ++i) acc += (i % 2 ? 4.0 : 2.0) * fn(a + i * step);
  return acc * step / 3.0;
}

}  // namespace

QuadratureEstimate footprint_by_quadrature(const OracleHit& hit, double h,
                                           const QuadratureConfig& qc, const FootprintConfig& fp) {
  if (!(h > 0.0)) throw DomainError("footprint_by_quadrature: h must be positive");
  QuadratureEstimate est;
  if (hit.f == 0.0) {
    est.converged = true;
    return est;
  }
  const double half = h / hit.cos_theta;
  // The slab edges are where the density's support ends; evaluate the
  // closed interval's endpoints as limits from inside.
  auto density = [&](double t) {
    const double d = std::min(std::abs(t - hit.t), half);
    const double F = hit.f * (1.0 - d / half) - fp.c;
    return normal_pdf_cdf_ratio(-F) * (hit.f / h) * hit.cos_theta;
  };
  auto both_halves = [&](int n) {
    return simpson(density, hit.t - half, hit.t, n) + simpson(density, hit.t, hit.t + half, n);
  };
  int n = qc.samples_per_kernel + qc.samples_per_kernel % 2;
  double prev = both_halves(n);
  for (int i = 0; i < qc.max_doublings; ++i) {
    n *= 2;
    const double next = both_halves(n);
    est.last_change = std::abs(next - prev);
    est.value = next;
    est.intervals = n;
    prev = next;
    if (est.last_change < qc.tolerance) {
      est.converged = true;
      break;
    }
  }
  return est;
}

QuadratureEstimate footprint_by_quadrature(const Ray& ray, const Surfel& s, double h,
                                           const QuadratureConfig& qc, const FootprintConfig& fp) {
  const auto hit = oracle_hit(ray, s, qc, fp);
  if (!hit) throw DomainError("footprint_by_quadrature: ray does not intersect the surfel");
  return footprint_by_quadrature(*hit, h, qc, fp);
}

std::optional<double> separating_half_width(std::span<const OracleHit> hits, double h_start,
                                            double tie_tol, double h_min) {
  std::vector<OracleHit> sorted(hits.begin(), hits.end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.t < b.t; });
  // One slab per coincident group, centered at the group's first hit.
  std::vector<OracleHit> leads;
  for (const auto& hit : sorted) {
    if (leads.empty() || hit.t - leads.back().t > tie_tol) leads.push_back(hit);
  }
  for (double h = h_start; h >= h_min; h *= 0.5) {
    bool ok = true;
    for (std::size_t i = 1; i < leads.size() && ok; ++i) {
      const double end_prev = leads[i - 1].t + h / leads[i - 1].cos_theta;
      const double begin = leads[i].t - h / leads[i].cos_theta;
      ok = end_prev < begin;
    }
    if (ok) return h;
  }
  return std::nullopt;
}

namespace {

struct SlabState {
  double T = 1.0;
  double absorbed = 0.0;     // integral of sigma T over the slab
  double depth_moment = 0.0; // integral of sigma T t
};

// RK4 over [a, b] with n steps for y' = (-sigma T, sigma T, sigma T t).
template <class Fn>
SlabState rk4(const Fn& sigma, double a, double b, int n, SlabState y) {
  const double step = (b - a) / n;
  auto deriv = [&](double t, double T) {
    const double s = sigma(t);
    return std::array<double, 3>{-s * T, s * T, s * T * t};
  };
  for (int i = 0; i < n; ++i) {
    const double t0 = a + i * step;
    const auto k1 = deriv(t0, y.T);
    const auto k2 = deriv(t0 + 0.5 * step, y.T + 0.5 * step * k1[0]);
    const auto k3 = deriv(t0 + 0.5 * step, y.T + 0.5 * step * k2[0]);
    const auto k4 = deriv(t0 + step, y.T + step * k3[0]);
    y.T += step / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]);
    y.absorbed += step / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]);
    y.depth_moment += step / 6.0 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2]);
  }
  return y;
}

}  // namespace

QuadratureRender render_by_quadrature(const Ray& ray, std::span<const Surfel> surfels,
                                      std::span<const Rgb> colors, const QuadratureConfig& qc,
                                      const FootprintConfig& fp, const OraclePolicy& policy) {
  qc.validate();
  if (colors.size() != surfels.size()) {
    throw ContractViolation("render_by_quadrature: one color per surfel");
  }
  QuadratureRender out;
  struct Hit {
    OracleHit hit;
    std::size_t surfel;
  };
  std::vector<Hit> hits;
  for (std::size_t i = 0; i < surfels.size(); ++i) {
    if (auto h = oracle_hit(ray, surfels[i], qc, fp)) hits.push_back({*h, i});
  }
  std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) {
    return a.hit.t < b.hit.t || (a.hit.t == b.hit.t && a.surfel < b.surfel);
  });

  const double tie_tol = tie_tolerance(surfels);
  struct Slab {
    OracleHit hit;  // f is the merged kernel value
    Rgb color;
  };
  std::vector<Slab> slabs;
  std::vector<OracleHit> plain;
  for (std::size_t i = 0; i < hits.size();) {
    std::size_t j = i + 1;
    while (j < hits.size() && hits[j].hit.t - hits[i].hit.t <= tie_tol) ++j;
    Slab slab{hits[i].hit, colors[hits[i].surfel]};
    for (std::size_t k = i + 1; k < j; ++k) {
      if (colors[hits[k].surfel] != slab.color) {
        out.preconditions_ok = false;
        out.diagnostic = "exactness preconditions violated: coincident kernels with different colors";
        return out;
      }
      slab.hit.f = oplus(slab.hit.f, hits[k].hit.f, fp);
    }
    slabs.push_back(slab);
    for (std::size_t k = i; k < j; ++k) plain.push_back(hits[k].hit);
    i = j;
  }

  const auto h = separating_half_width(plain, qc.h, tie_tol);
  if (!h) {
    out.preconditions_ok = false;
    out.diagnostic = "exactness preconditions violated: extrusion slabs overlap at minimal h";
    return out;
  }
  out.h_used = *h;

  SlabState state;
  double depth_moment = 0.0;
  for (const auto& slab : slabs) {
    if (policy.alpha_floor > 0.0) {
      const double rho = footprint_by_quadrature(slab.hit, *h, qc, fp).value;
      if (-std::expm1(-rho) < policy.alpha_floor) continue;
    }
    const double half = *h / slab.hit.cos_theta;
    auto sigma = [&](double t) {
      const double d = std::min(std::abs(t - slab.hit.t), half);
      const double F = slab.hit.f * (1.0 - d / half) - fp.c;
      return normal_pdf_cdf_ratio(-F) * (slab.hit.f / *h) * slab.hit.cos_theta;
    };
    auto integrate = [&](int n) {
      SlabState s{state.T, 0.0, 0.0};
      s = rk4(sigma, slab.hit.t - half, slab.hit.t, n, s);
      s = rk4(sigma, slab.hit.t, slab.hit.t + half, n, s);
      return s;
    };
    int n = qc.samples_per_kernel;
    SlabState coarse = integrate(n), fine = coarse;
    for (int i = 0; i < qc.max_doublings; ++i) {
      n *= 2;
      fine = integrate(n);
      const double change = std::max({std::abs(fine.T - coarse.T),
                                      std::abs(fine.absorbed - coarse.absorbed),
                                      std::abs(fine.depth_moment - coarse.depth_moment)});
      coarse = fine;
      if (change < qc.tolerance) break;
    }
    out.color += fine.absorbed * slab.color;
    out.weight_sum += fine.absorbed;
    depth_moment += fine.depth_moment;
    state.T = fine.T;
    if (policy.early_exit > 0.0 && state.T < policy.early_exit) break;
  }
  out.transmittance = state.T;
  out.color += state.T * policy.background;
  out.depth_valid = out.weight_sum > 1e-6;
  out.depth = out.depth_valid ? depth_moment / out.weight_sum : 0.0;
  return out;
}

}  // namespace gfs
