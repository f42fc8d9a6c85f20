#include <algorithm>
#include <cmath>

#include "gfs/errors.hpp"
#include "gfs/parallel.hpp"
#include "gfs/renderer.hpp"

namespace gfs {

void GradBuffers::resize(std::size_t n, int dim, std::size_t net_params) {
  center.assign(n, Vec3::Zero());
  rotation.assign(n, Vec3::Zero());
  scale_u.assign(n, 0.0);
  scale_v.assign(n, 0.0);
  weight.assign(n, 0.0);
  color.assign(n, Rgb::Zero());
  attr_dim = dim;
  attr.assign(n * std::size_t(std::max(dim, 0)), 0.0);
  net.assign(net_params, 0.0);
}

void GradBuffers::set_zero() {
  std::fill(center.begin(), center.end(), Vec3::Zero());
  std::fill(rotation.begin(), rotation.end(), Vec3::Zero());
  std::fill(scale_u.begin(), scale_u.end(), 0.0);
  std::fill(scale_v.begin(), scale_v.end(), 0.0);
  std::fill(weight.begin(), weight.end(), 0.0);
  std::fill(color.begin(), color.end(), Rgb::Zero());
  std::fill(attr.begin(), attr.end(), 0.0);
  std::fill(net.begin(), net.end(), 0.0);
}

GradBuffers& GradBuffers::operator+=(const GradBuffers& o) {
  if (o.center.size() != center.size() || o.attr.size() != attr.size() ||
      o.net.size() != net.size()) {
    throw ContractViolation("GradBuffers: size mismatch");
  }
  for (std::size_t i = 0; i < center.size(); ++i) {
    center[i] += o.center[i];
    rotation[i] += o.rotation[i];
    scale_u[i] += o.scale_u[i];
    scale_v[i] += o.scale_v[i];
    weight[i] += o.weight[i];
    color[i] += o.color[i];
  }
  for (std::size_t i = 0; i < attr.size(); ++i) attr[i] += o.attr[i];
  for (std::size_t i = 0; i < net.size(); ++i) net[i] += o.net[i];
  return *this;
}

bool GradBuffers::all_finite() const {
  auto finite = [](const auto& v) {
    return std::all_of(v.begin(), v.end(), [](const auto& x) {
      if constexpr (std::is_same_v<std::decay_t<decltype(x)>, double>) {
        return std::isfinite(x);
      } else {
        return x.allFinite();
      }
    });
  };
  return finite(center) && finite(rotation) && finite(scale_u) && finite(scale_v) &&
         finite(weight) && finite(color) && finite(attr) && finite(net);
}

namespace {

// Chain rule from (d L / d f, d L / d t, d L / d n) of one member hit to the
// surfel parameters.
void hit_backward(const Ray& ray, const Surfel& s, std::uint32_t idx, double t, double df,
                  double dt, const Vec3& dn, GradBuffers& g) {
  const Vec3 n = s.normal();
  const double denom = ray.direction.dot(n);
  const Vec3 p = ray.origin + t * ray.direction - s.center;
  const double a = p.dot(s.tangent_u), b = p.dot(s.tangent_v);
  const double u = a / s.scale_u, v = b / s.scale_v;
  const double G = std::exp(-0.5 * (u * u + v * v));
  const double f = s.weight * G;

  g.weight[idx] += df * G;
  const double da = -df * f * u / s.scale_u;
  const double db = -df * f * v / s.scale_v;
  g.scale_u[idx] += df * f * u * u / s.scale_u;
  g.scale_v[idx] += df * f * v * v / s.scale_v;

  const Vec3 gp = da * s.tangent_u + db * s.tangent_v;
  const double gt = dt + gp.dot(ray.direction);
  g.center[idx] += -gp + gt * n / denom;
  const Vec3 gn = -gt * p / denom + dn;
  g.rotation[idx] += s.tangent_u.cross(da * p) + s.tangent_v.cross(db * p) + n.cross(gn);
}

}  // namespace

GradBuffers backward(const Camera& camera, std::span<const Surfel> surfels,
                     const RenderBuffers& buffers, const PixelGradients& up,
                     const RenderOptions& options) {
  const ForwardCache& cache = buffers.cache;
  if (!cache.valid) throw ContractViolation("backward: render was run without a forward cache");
  if (cache.per_ray_blend) {
    throw ContractViolation("backward: per-ray color blending is forward-only");
  }
  const std::size_t P = buffers.pixels();
  const std::size_t E = cache.entries.size();
  if ((!up.color.empty() && up.color.size() != 3 * P) || (!up.depth.empty() && up.depth.size() != P) ||
      (!up.entry_weight.empty() && up.entry_weight.size() != E) ||
      (!up.entry_depth.empty() && up.entry_depth.size() != E) ||
      (!up.entry_normal.empty() && up.entry_normal.size() != E)) {
    throw ContractViolation("backward: upstream gradient sizes do not match the render");
  }
  const CompositeConfig& cc = options.composite;
  const bool refined = cc.mode == CompositeMode::kRefined;
  const int W = buffers.width, H = buffers.height;

  int workers = options.workers > 0 ? options.workers : default_workers();
  workers = std::max(1, std::min(workers, H));
  std::vector<GradBuffers> partial(workers);
  for (auto& g : partial) g.resize(surfels.size(), 0, 0);

  parallel_for(std::size_t(H), workers, [&](std::size_t row_begin, std::size_t row_end, int wk) {
    GradBuffers& g = partial[wk];
    std::vector<double> ge;

    for (std::size_t y = row_begin; y < row_end; ++y) {
      for (int x = 0; x < W; ++x) {
        const std::size_t p = y * W + x;
        const std::size_t base = cache.pixel_offset[p];
        const auto entries = cache.pixel(p);
        if (entries.empty()) continue;
        const Ray ray = camera.pixel_ray(x, int(y));

        const Rgb dC = up.color.empty() ? Rgb::Zero()
                                        : Rgb(up.color[3 * p], up.color[3 * p + 1], up.color[3 * p + 2]);
        const bool dvalid = buffers.depth_valid[p] != 0;
        const double dD = (dvalid && !up.depth.empty()) ? up.depth[p] : 0.0;
        const double Wsum = buffers.weight_sum[p];
        const double D = buffers.depth[p];

        const std::size_t n = entries.size();
        ge.assign(n, 0.0);
        for (std::size_t e = 0; e < n; ++e) {
          double g_e = dC.dot(entries[e].color);
          if (dD != 0.0) g_e += dD * (entries[e].t - D) / Wsum;
          if (!up.entry_weight.empty()) g_e += up.entry_weight[base + e];
          ge[e] = g_e;
        }

        // Reverse sweep; `suffix` = sum_{k>e} g_k w_k + (dC . bg) T_final.
        double suffix = dC.dot(cc.background) * buffers.transmittance[p];
        for (std::size_t r = n; r-- > 0;) {
          const PixelEntry& e = entries[r];
          double d_rho = 0.0, d_f = 0.0;
          if (refined) {
            d_rho = ge[r] * e.transmittance_before * (1.0 - e.alpha) - suffix;
          } else {
            const double d_alpha = ge[r] * e.transmittance_before - suffix / (1.0 - e.alpha);
            d_f = e.f < kClassicAlphaMax ? d_alpha : 0.0;
          }
          suffix += ge[r] * e.weight;

          double dt = up.entry_depth.empty() ? 0.0 : up.entry_depth[base + r];
          if (dD != 0.0) dt += dD * e.weight / Wsum;
          const Rgb gc = e.weight * dC;
          const Vec3 dn_entry = up.entry_normal.empty() ? Vec3::Zero() : up.entry_normal[base + r];

          const std::uint32_t m = e.member_count;
          for (std::uint32_t k = 0; k < m; ++k) {
            const MemberHit& hit = cache.members[e.member_begin + k];
            const Surfel& s = surfels[hit.surfel];
            double df_k = d_f;
            if (refined) {
              double d_rho_k = d_rho;
              if (m > 1 && e.rho > 0.0) {
                d_rho_k += gc.dot(hit.color - e.color) / e.rho;
                g.color[hit.surfel] += gc * (hit.rho / e.rho);
              } else if (m > 1) {
                g.color[hit.surfel] += gc / double(m);
              } else {
                g.color[hit.surfel] += gc;
              }
              df_k = d_rho_k * footprint_grad(hit.f, cc.footprint);
            } else {
              g.color[hit.surfel] += gc;
            }
            Vec3 dn = Vec3::Zero();
            if (k == 0 && dn_entry.squaredNorm() > 0.0) {
              // The entry normal is the surfel normal flipped toward the camera.
              dn = s.normal().dot(ray.direction) > 0.0 ? Vec3(-dn_entry) : dn_entry;
            }
            hit_backward(ray, s, hit.surfel, hit.t, df_k, dt / double(m), dn, g);
          }
        }
      }
    }
  });

  GradBuffers total = std::move(partial[0]);
  for (int w = 1; w < workers; ++w) total += partial[w];
  return total;
}

void backward_shading(std::span<const Surfel> surfels, const ShadedSurfels& shaded,
                      const ShadingNet* net, std::span<const ColorAttr> attrs, GradBuffers& grads) {
  if (shaded.caches.size() != surfels.size() || grads.color.size() != surfels.size()) {
    throw ContractViolation("backward_shading: size mismatch");
  }
  if (!attrs.empty() && attrs.size() != surfels.size()) {
    throw ContractViolation("backward_shading: one attribute per surfel");
  }
  const std::size_t n = surfels.size();
  if (n == 0) return;
  const ColorKind kind = kind_of(attrs.empty() ? surfels[0].color : attrs[0]);
  const int dim = attr_dim(kind);
  if (grads.attr_dim != dim || grads.attr.size() != n * std::size_t(dim)) {
    grads.attr_dim = dim;
    grads.attr.assign(n * std::size_t(dim), 0.0);
  }
  if (net && grads.net.size() != net->parameter_count()) grads.net.assign(net->parameter_count(), 0.0);

  ShadingGrad sg;
  for (std::size_t i = 0; i < n; ++i) {
    if (grads.color[i].squaredNorm() == 0.0) continue;
    const ColorAttr& attr = attrs.empty() ? surfels[i].color : attrs[i];
    eval_color_backward(attr, shaded.caches[i], grads.color[i], net, sg, grads.net);
    for (int k = 0; k < dim; ++k) grads.attr[i * dim + k] += sg.attr[k];
    grads.center[i] += sg.center;
    grads.rotation[i] += surfels[i].normal().cross(sg.normal);
  }
}

}  // namespace gfs
