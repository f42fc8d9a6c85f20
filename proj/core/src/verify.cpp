#include "gfs/verify.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gfs/colorprop.hpp"
#include "gfs/errors.hpp"
#include "gfs/oracle.hpp"
#include "gfs/renderer.hpp"

namespace gfs {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double x) {
  std::ostringstream s;
  s.precision(6);
  s << x;
  return s.str();
}

// Surfel whose plane crosses `ray` at depth t with normal making
// |cos| = cos_theta, placed so the hit lands at local (u, v).
Surfel surfel_on_ray(const Ray& ray, double t, const Vec3& normal, double su, double sv, double u,
                     double v, double weight, std::mt19937_64& rng) {
  Surfel s;
  const Vec3 n = normal.normalized();
  const Vec3 a = any_orthogonal(n);
  std::uniform_real_distribution<double> spin(0.0, 6.283185307179586);
  const double phi = spin(rng);
  s.tangent_u = std::cos(phi) * a + std::sin(phi) * n.cross(a);
  s.tangent_v = n.cross(s.tangent_u);
  s.scale_u = su;
  s.scale_v = sv;
  s.weight = weight;
  s.center = ray.at(t) - (u * su) * s.tangent_u - (v * sv) * s.tangent_v;
  return s;
}

Vec3 random_normal_facing(const Vec3& dir, double min_cos, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  for (;;) {
    Vec3 n(g(rng), g(rng), g(rng));
    if (n.norm() < 1e-6) continue;
    n.normalize();
    if (std::abs(n.dot(dir)) >= min_cos) return n;
  }
}

Camera single_pixel_camera() {
  Camera cam;
  cam.fx = cam.fy = 1.0;
  cam.cx = cam.cy = 0.5;
  cam.width = cam.height = 1;
  cam.near_clip = 0.01;
  return cam;
}

}  // namespace

CheckResult check_footprint_closed_form() {
  const auto t0 = Clock::now();
  CheckResult r;
  r.name = "footprint_closed_form";
  r.tolerance = 1e-7;
  FootprintConfig unnorm;
  unnorm.normalize_s0 = false;
  FootprintConfig norm;
  QuadratureConfig qc;
  const double fs[] = {0.1, 0.5, 1.0, 2.0, 3.0, 4.0, 4.28};
  const double hs[] = {1e-2, 1e-3, 1e-4};
  double limit_err = 0.0, norm_err = 0.0, spread = 0.0;
  bool converged = true;
  for (double f : fs) {
    double lo = 1e300, hi = -1e300;
    for (double h : hs) {
      for (double cos_theta : {1.0, 0.5}) {
        OracleHit hit{1.0, f, cos_theta};
        const auto est = footprint_by_quadrature(hit, h, qc, norm);
        converged = converged && est.converged;
        lo = std::min(lo, est.value);
        hi = std::max(hi, est.value);
        limit_err = std::max(limit_err, std::abs(est.value - footprint(f, unnorm)));
        norm_err = std::max(norm_err, std::abs(est.value - footprint(f, norm)));
      }
    }
    spread = std::max(spread, hi - lo);
  }
  r.measured = std::max(limit_err, spread);
  r.pass = converged && limit_err <= r.tolerance && spread <= r.tolerance;
  r.detail = "max |quadrature - (-2 ln Psi(c - f))| = " + fmt(limit_err) +
             "; h-spread = " + fmt(spread) +
             "; max |quadrature - normalized footprint| = " + fmt(norm_err) +
             (converged ? "" : "; quadrature did not converge");
  r.seconds = seconds_since(t0);
  return r;
}

CheckResult check_opacity_clamp() {
  const auto t0 = Clock::now();
  CheckResult r;
  r.name = "opacity_clamp";
  FootprintConfig fp;
  const double alpha = 1.0 - std::exp(-footprint(fp.f_max, fp));
  r.measured = alpha;
  r.tolerance = 0.9905;
  r.pass = alpha >= 0.9890 && alpha <= 0.9905;
  r.detail = "1 - exp(-footprint(" + fmt(fp.f_max) + ")) = " + fmt(alpha) + ", required [0.9890, 0.9905]";
  r.seconds = seconds_since(t0);
  return r;
}

CheckResult check_fast_path() {
  const auto t0 = Clock::now();
  CheckResult r;
  r.name = "fast_path_fidelity";
  r.tolerance = 0.05;
  FootprintConfig exact;
  FootprintConfig fast;
  fast.fast_path = true;
  const int n = 20000;
  double worst = 0.0, worst_f = 0.0, worst_abs = 0.0;
  const double range = footprint(exact.f_max, exact);
  for (int i = 0; i <= n; ++i) {
    const double f = 0.05 + (exact.f_max - 0.05) * i / n;
    const double e = footprint(f, exact), a = footprint(f, fast);
    const double rel = std::abs(a - e) / e;
    if (rel > worst) {
      worst = rel;
      worst_f = f;
    }
    worst_abs = std::max(worst_abs, std::abs(a - e));
  }
  r.measured = worst;
  r.pass = worst <= r.tolerance;
  r.detail = "max pointwise relative deviation " + fmt(100.0 * worst) + "% at f = " + fmt(worst_f) +
             "; max absolute deviation " + fmt(worst_abs) + " (" + fmt(100.0 * worst_abs / range) +
             "% of S(f_max))";
  r.seconds = seconds_since(t0);
  return r;
}

namespace {

struct CompositingErrors {
  double refined = 0.0;
  double classic = 0.0;
  double depth = 0.0;
  int classic_rays = 0;
  int violated = 0;
};

// Random depth-separated rays composited both ways against the quadrature
// renderer.
CompositingErrors compositing_errors(std::uint64_t seed, int rays) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  CompositeConfig cc;
  QuadratureConfig qc;
  OraclePolicy policy;
  policy.alpha_floor = cc.alpha_floor;
  policy.early_exit = cc.early_exit;
  CompositingErrors e;
  for (int k = 0; k < rays; ++k) {
    const Ray ray = make_ray(Vec3(g(rng), g(rng), g(rng)), Vec3(g(rng), g(rng), g(rng)));
    const int m = 1 + int(unit(rng) * 6.0) % 6;
    SurfelSet surfels;
    std::vector<Rgb> colors;
    double t = 0.5;
    for (int i = 0; i < m; ++i) {
      t += 0.2 + unit(rng);
      const Vec3 n = random_normal_facing(ray.direction, 0.3, rng);
      const double radius = 2.8 * std::sqrt(unit(rng));
      const double ang = 6.283185307179586 * unit(rng);
      const double su = 0.05 + unit(rng), sv = 0.05 + unit(rng);
      const double w = 0.05 + 5.0 * unit(rng);
      surfels.push_back(surfel_on_ray(ray, t, n, su, sv, radius * std::cos(ang),
                                      radius * std::sin(ang), w, rng));
      colors.push_back(Rgb(unit(rng), unit(rng), unit(rng)));
    }
    const auto records = intersect_all(ray, surfels, 0.0, kDefaultCutoff, cc.footprint);
    std::vector<Rgb> rc;
    bool big = false;
    for (const auto& rec : records) {
      rc.push_back(colors[rec.surfel]);
      big = big || rec.f > 1.0;
    }
    const auto refined = composite_refined(records, rc, cc);
    const auto classic = composite_classic(records, rc, cc);
    const auto quad = render_by_quadrature(ray, surfels, colors, qc, cc.footprint, policy);
    if (!quad.preconditions_ok) {
      ++e.violated;
      continue;
    }
    e.refined = std::max(e.refined, (refined.color - quad.color).cwiseAbs().maxCoeff());
    if (refined.depth_valid && quad.depth_valid) {
      e.depth = std::max(e.depth, std::abs(refined.depth - quad.depth));
    }
    if (big) {
      ++e.classic_rays;
      e.classic = std::max(e.classic, (classic.color - quad.color).cwiseAbs().maxCoeff());
    }
  }
  return e;
}

}  // namespace

CheckResult check_refined_exactness(std::uint64_t seed, int rays) {
  const auto t0 = Clock::now();
  CheckResult r;
  r.name = "refined_compositing_exactness";
  r.tolerance = 1e-6;
  const CompositingErrors e = compositing_errors(seed, rays);
  r.measured = e.refined;
  r.pass = e.violated == 0 && e.refined <= r.tolerance && e.classic >= 1e-2;
  r.detail = "refined max per-channel error " + fmt(e.refined) + " over " + std::to_string(rays) +
             " rays (depth " + fmt(e.depth) + "); classic max error " + fmt(e.classic) + " over " +
             std::to_string(e.classic_rays) + " rays with f > 1 (required >= 0.01)" +
             (e.violated ? "; " + std::to_string(e.violated) + " rays violated preconditions" : "");
  r.seconds = seconds_since(t0);
  return r;
}

CheckResult check_classic_bias(std::uint64_t seed, int rays) {
  const auto t0 = Clock::now();
  CheckResult r;
  r.name = "classic_compositing_bias";
  r.tolerance = 1e-2;
  const CompositingErrors e = compositing_errors(seed, rays);
  r.measured = e.classic;
  r.pass = e.classic >= r.tolerance;
  r.detail = "classic max per-channel error vs quadrature " + fmt(e.classic) + " over " +
             std::to_string(e.classic_rays) + " rays with f > 1; exactness fails as expected (refined: " +
             fmt(e.refined) + ")";
  r.seconds = seconds_since(t0);
  return r;
}

CheckResult check_footprint_at(double f) {
  const auto t0 = Clock::now();
  CheckResult r;
  r.name = "footprint_at_f";
  r.tolerance = 1e-7;
  FootprintConfig unnorm;
  unnorm.normalize_s0 = false;
  FootprintConfig norm;
  if (!(f >= 0.0) || f > norm.f_max) throw ConfigError("footprint check: f must lie in [0, f_max]");
  QuadratureConfig qc;
  const OracleHit hit{1.0, f, 1.0};
  const auto est = footprint_by_quadrature(hit, qc.h, qc, norm);
  const double d_unnorm = std::abs(est.value - footprint(f, unnorm));
  const double d_norm = std::abs(est.value - footprint(f, norm));
  r.measured = d_unnorm;
  r.pass = est.converged && d_unnorm <= r.tolerance;
  r.detail = "f = " + fmt(f) + ": quadrature " + fmt(est.value) + ", |delta| vs -2 ln Psi(c - f) = " +
             fmt(d_unnorm) + ", |delta| vs normalized footprint = " + fmt(d_norm);
  r.seconds = seconds_since(t0);
  return r;
}

CheckResult check_merge(std::uint64_t seed, int runs) {
  const auto t0 = Clock::now();
  CheckResult r;
  r.name = "coincident_merge";
  r.tolerance = 1e-12;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  CompositeConfig cc;
  cc.early_exit = 0.0;  // the identity concerns the full product
  cc.alpha_floor = 0.0;
  double worst = 0.0;
  int bad_merges = 0;
  for (int k = 0; k < runs; ++k) {
    std::vector<IntersectionRecord> records;
    std::vector<Rgb> colors;
    auto add = [&](double t, double f, const Rgb& c) {
      IntersectionRecord rec;
      rec.t = t;
      rec.f = f;
      rec.rho = footprint(f, cc.footprint);
      rec.surfel = std::uint32_t(records.size());
      records.push_back(rec);
      colors.push_back(c);
    };
    const int before = int(unit(rng) * 3.0), after = int(unit(rng) * 3.0);
    double t = 1.0;
    for (int i = 0; i < before; ++i) add(t += 0.1 + unit(rng), 0.1 + 4.0 * unit(rng), Rgb(unit(rng), unit(rng), unit(rng)));
    const int m = 2 + int(unit(rng) * 4.0) % 4;
    const Rgb shared(unit(rng), unit(rng), unit(rng));
    t += 0.1 + unit(rng);
    for (int i = 0; i < m; ++i) add(t, 0.5 + 3.5 * unit(rng), shared);
    for (int i = 0; i < after; ++i) add(t += 0.1 + unit(rng), 0.1 + 4.0 * unit(rng), Rgb(unit(rng), unit(rng), unit(rng)));

    const auto plain = composite_refined(records, colors, cc);
    const auto merged = merge_coincident(records, colors, cc.footprint, 1e-9);
    if (merged.records.size() != records.size() - std::size_t(m - 1)) ++bad_merges;
    const auto mres = composite_refined(merged.records, merged.colors, cc);
    worst = std::max({worst, (plain.color - mres.color).cwiseAbs().maxCoeff(),
                      std::abs(plain.depth - mres.depth),
                      std::abs(plain.transmittance - mres.transmittance)});
  }
  r.measured = worst;
  r.pass = bad_merges == 0 && worst <= r.tolerance;
  r.detail = "max |merged - unmerged| over color, depth, transmittance = " + fmt(worst) + " on " +
             std::to_string(runs) + " runs" +
             (bad_merges ? "; " + std::to_string(bad_merges) + " runs merged incorrectly" : "");
  r.seconds = seconds_since(t0);
  return r;
}

CheckResult check_oplus_algebra(std::uint64_t seed, int pairs) {
  const auto t0 = Clock::now();
  CheckResult r;
  r.name = "oplus_algebra";
  r.tolerance = 1e-9;
  std::mt19937_64 rng(seed);
  // Keep a (+) b (+) c below the clamp so footprints stay additive.
  std::uniform_real_distribution<double> dist(0.0, 3.0);
  FootprintConfig fp;
  int noncommuting = 0;
  double assoc = 0.0, additive = 0.0;
  for (int i = 0; i < pairs; ++i) {
    const double a = dist(rng), b = dist(rng), c = dist(rng);
    const double ab = oplus(a, b, fp);
    if (ab != oplus(b, a, fp)) ++noncommuting;
    assoc = std::max(assoc, std::abs(oplus(ab, c, fp) - oplus(a, oplus(b, c, fp), fp)));
    additive = std::max(additive, std::abs(footprint(ab, fp) - footprint(a, fp) - footprint(b, fp)));
  }
  r.measured = std::max(assoc, additive);
  r.pass = noncommuting == 0 && assoc <= r.tolerance && additive <= r.tolerance;
  r.detail = std::to_string(noncommuting) + " non-commuting pairs; associativity " + fmt(assoc) +
             "; additivity " + fmt(additive) + " over " + std::to_string(pairs) + " pairs";
  r.seconds = seconds_since(t0);
  return r;
}

namespace {

struct GradProblem {
  Camera camera = single_pixel_camera();
  SurfelSet surfels;
  std::optional<ShadingNet> net;
  RenderOptions opts;
  Rgb dC;
  double dD = 0.0;
  std::vector<double> gw, gt;
  std::vector<Vec3> gn;

  struct Eval {
    double loss = 0.0;
    std::vector<std::uint8_t> relu_pattern;
    std::size_t entries = 0;
  };

  Eval evaluate(const SurfelSet& s, const ShadingNet* n) const {
    const ShadedSurfels shaded = shade_surfels(camera, s, n);
    const RenderBuffers buf = render(camera, s, shaded.colors, opts);
    Eval e;
    const auto entries = buf.cache.pixel(0);
    e.entries = entries.size();
    e.loss = dC.dot(Rgb(buf.color[0], buf.color[1], buf.color[2])) + dD * buf.depth[0];
    for (std::size_t k = 0; k < entries.size() && k < gw.size(); ++k) {
      e.loss += gw[k] * entries[k].weight + gt[k] * entries[k].t + gn[k].dot(entries[k].normal);
    }
    for (const auto& c : shaded.caches) {
      for (double h : c.net.hidden1) e.relu_pattern.push_back(h > 0.0);
      for (double h : c.net.hidden2) e.relu_pattern.push_back(h > 0.0);
    }
    return e;
  }

  GradBuffers analytic() const {
    const ShadingNet* n = net ? &*net : nullptr;
    const ShadedSurfels shaded = shade_surfels(camera, surfels, n);
    const RenderBuffers buf = render(camera, surfels, shaded.colors, opts);
    PixelGradients up;
    up.color = {dC[0], dC[1], dC[2]};
    up.depth = {dD};
    up.entry_weight = gw;
    up.entry_depth = gt;
    up.entry_normal = gn;
    GradBuffers g = backward(camera, surfels, buf, up, opts);
    backward_shading(surfels, shaded, n, {}, g);
    return g;
  }
};

struct ClassError {
  std::vector<double> analytic, numeric;
  void add(double a, double n) {
    analytic.push_back(a);
    numeric.push_back(n);
  }
  double relative() const {
    double diff = 0.0, ref = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
      diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
      ref += numeric[i] * numeric[i];
    }
    return std::sqrt(diff) / (std::sqrt(ref) + 1e-8);
  }
};

}  // namespace

CheckResult check_gradients(std::uint64_t seed, int rays) {
  const auto t0 = Clock::now();
  CheckResult r;
  r.name = "gradient_certification";
  r.tolerance = 1e-4;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  const char* names[] = {"center", "frame", "scales", "weight", "sh", "latent", "net"};
  std::array<double, 7> worst{};
  int tested = 0, attempts = 0, relu_skips = 0;

  while (tested < rays && attempts < rays * 20) {
    ++attempts;
    GradProblem base;
    base.opts.composite.background = Rgb(unit(rng), unit(rng), unit(rng));
    const Ray ray = base.camera.pixel_ray(0, 0);
    std::array<double, 2> depths = {1.5 + unit(rng), 3.0 + unit(rng)};
    for (int i = 0; i < 2; ++i) {
      const Vec3 n = random_normal_facing(ray.direction, 0.4, rng);
      const double radius = 2.4 * std::sqrt(unit(rng));
      const double ang = 6.283185307179586 * unit(rng);
      const double u = radius * std::cos(ang), v = radius * std::sin(ang);
      const double f = 0.3 + 3.7 * unit(rng);
      const double w = f / std::exp(-0.5 * radius * radius);
      Surfel s = surfel_on_ray(ray, depths[i], n, 0.2 + unit(rng), 0.2 + unit(rng), u, v, w, rng);
      ShColor sh;
      for (int ch = 0; ch < 3; ++ch) sh.coeffs[ch] = (0.35 + 0.3 * unit(rng) - 0.5) / kShC0;
      for (int k = 3; k < kShColorCoeffs; ++k) sh.coeffs[k] = 0.01 * g(rng);
      s.color = sh;
      s.id = std::uint32_t(i);
      base.surfels.push_back(s);
    }
    base.dC = Rgb(g(rng), g(rng), g(rng));
    base.dD = g(rng);
    for (int k = 0; k < 2; ++k) {
      base.gw.push_back(g(rng));
      base.gt.push_back(g(rng));
      base.gn.push_back(Vec3(g(rng), g(rng), g(rng)));
    }

    GradProblem latent = base;
    latent.net.emplace(4);
    latent.net->init_random(rng());
    for (auto& s : latent.surfels) {
      LatentColor lc;
      for (auto& x : lc.latent) x = 0.5 * g(rng);
      s.color = lc;
    }

    // Both surfels must composite as separate entries, away from the clamp,
    // cutoff, alpha floor and SH clamp boundaries.
    bool ok = true;
    {
      const ShadedSurfels shaded = shade_surfels(base.camera, base.surfels, nullptr);
      for (const auto& c : shaded.caches) {
        for (int ch = 0; ch < 3; ++ch) ok = ok && c.raw[ch] > 1e-3 && c.raw[ch] < 1.0 - 1e-3;
      }
      const auto buf = render(base.camera, base.surfels, shaded.colors, base.opts);
      const auto entries = buf.cache.pixel(0);
      ok = ok && entries.size() == 2;
      for (const auto& e : entries) {
        ok = ok && e.f < base.opts.composite.footprint.f_max - 1e-3 &&
             e.alpha > base.opts.composite.alpha_floor + 1e-3;
      }
    }
    if (!ok) continue;

    std::array<ClassError, 7> err;
    bool skip = false;
    auto probe = [&](const GradProblem& p, int cls, double analytic, double step,
                     const std::function<void(SurfelSet&, std::optional<ShadingNet>&, double)>& perturb) {
      SurfelSet sp = p.surfels, sm = p.surfels;
      std::optional<ShadingNet> np = p.net, nm = p.net;
      perturb(sp, np, step);
      perturb(sm, nm, -step);
      const auto ep = p.evaluate(sp, np ? &*np : nullptr);
      const auto em = p.evaluate(sm, nm ? &*nm : nullptr);
      if (ep.entries != 2 || em.entries != 2 || ep.relu_pattern != em.relu_pattern) {
        ++relu_skips;
        skip = true;
        return;
      }
      err[cls].add(analytic, (ep.loss - em.loss) / (2.0 * step));
    };

    for (const GradProblem* p : {&base, &latent}) {
      const GradBuffers ga = p->analytic();
      for (int i = 0; i < 2; ++i) {
        for (int a = 0; a < 3; ++a) {
          probe(*p, 0, ga.center[i][a], 1e-5, [&](SurfelSet& s, auto&, double h) { s[i].center[a] += h; });
          probe(*p, 1, ga.rotation[i][a], 1e-5, [&](SurfelSet& s, auto&, double h) {
            Vec3 d = Vec3::Zero();
            d[a] = h;
            const Mat3 R = rotation_from_axis_angle(d);
            s[i].tangent_u = R * s[i].tangent_u;
            s[i].tangent_v = R * s[i].tangent_v;
          });
        }
        const double su = p->surfels[i].scale_u, sv = p->surfels[i].scale_v, w = p->surfels[i].weight;
        probe(*p, 2, ga.scale_u[i], 1e-5 * su, [&](SurfelSet& s, auto&, double h) { s[i].scale_u += h; });
        probe(*p, 2, ga.scale_v[i], 1e-5 * sv, [&](SurfelSet& s, auto&, double h) { s[i].scale_v += h; });
        probe(*p, 3, ga.weight[i], 1e-5 * w, [&](SurfelSet& s, auto&, double h) { s[i].weight += h; });
        const int cls = p->net ? 5 : 4;
        const int dim = ga.attr_dim;
        for (int k = 0; k < dim; ++k) {
          probe(*p, cls, ga.attr[i * dim + k], 1e-5,
                [&](SurfelSet& s, auto&, double h) { attr_values(s[i].color)[k] += h; });
        }
      }
      if (p->net) {
        const std::size_t np = p->net->parameter_count();
        for (int j = 0; j < 40; ++j) {
          const std::size_t k = std::size_t(unit(rng) * double(np)) % np;
          probe(*p, 6, ga.net[k], 1e-5, [&](SurfelSet&, std::optional<ShadingNet>& net, double h) {
            net->parameters()[k] += h;
          });
        }
      }
    }
    if (skip) continue;
    for (int c = 0; c < 7; ++c) worst[c] = std::max(worst[c], err[c].relative());
    ++tested;
  }
  r.measured = *std::max_element(worst.begin(), worst.end());
  r.pass = tested == rays && r.measured <= r.tolerance;
  std::ostringstream d;
  d << "max relative error per class:";
  for (int c = 0; c < 7; ++c) d << ' ' << names[c] << '=' << fmt(worst[c]);
  d << "; " << tested << " rays tested, " << attempts - tested << " draws rejected near boundaries";
  r.detail = d.str();
  r.seconds = seconds_since(t0);
  return r;
}

CheckResult check_continuity(int steps) {
  const auto t0 = Clock::now();
  CheckResult r;
  r.name = "blend_continuity";
  const Camera cam = single_pixel_camera();
  const Ray ray = cam.pixel_ray(0, 0);
  SurfelSet surfels(2);
  for (auto& s : surfels) {
    s.tangent_u = Vec3::UnitX();
    s.tangent_v = Vec3::UnitY();
    s.scale_u = s.scale_v = 0.5;
    s.weight = 2.0;
  }
  const std::vector<Rgb> colors = {Rgb(1.0, 0.1, 0.1), Rgb(0.1, 0.1, 1.0)};
  const double tau = 100.0, t_fixed = 2.0, span = 1.0 / tau;
  surfels[0].center = ray.at(t_fixed);

  auto sweep = [&](std::optional<double> blend) {
    RenderOptions opts;
    opts.per_ray_blend_tau = blend;
    opts.keep_cache = false;
    std::vector<double> jumps;
    Rgb prev;
    for (int s = 0; s <= steps; ++s) {
      surfels[1].center = ray.at(t_fixed - span + 2.0 * span * s / steps);
      const auto buf = render(cam, surfels, colors, opts);
      const Rgb c(buf.color[0], buf.color[1], buf.color[2]);
      if (s > 0) jumps.push_back((c - prev).norm());
      prev = c;
    }
    return jumps;
  };
  const auto blended = sweep(tau);
  const auto plain = sweep(std::nullopt);
  auto sorted = blended;
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
  const double median = sorted[sorted.size() / 2];
  const double bmax = *std::max_element(blended.begin(), blended.end());
  const double pmax = *std::max_element(plain.begin(), plain.end());
  const double bound = 5.0 * median;
  r.measured = bmax / median;
  r.tolerance = 5.0;
  r.pass = bmax <= bound && pmax >= 10.0 * bound;
  r.detail = "blended: max step " + fmt(bmax) + ", median " + fmt(median) + " (ratio " +
             fmt(bmax / median) + ", bound 5); unblended jump " + fmt(pmax) + " = " +
             fmt(pmax / bound) + "x the blended bound (required >= 10)";
  r.seconds = seconds_since(t0);
  return r;
}

CheckResult check_spatial_blend(std::uint64_t seed, int clusters) {
  const auto t0 = Clock::now();
  CheckResult r;
  r.name = "spatial_blend_knn";
  r.tolerance = 0.0;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int k = 10;
  const double tau = 100.0;
  std::size_t table_mismatch = 0, blend_mismatch = 0, compared = 0;
  for (int c = 0; c < clusters; ++c) {
    const std::size_t n = 500;
    SurfelSet surfels(n);
    std::vector<Vec3> centers(n);
    std::vector<Vec3> blobs(5);
    for (auto& b : blobs) b = Vec3(g(rng), g(rng), g(rng)) * 0.2;
    for (std::size_t i = 0; i < n; ++i) {
      Vec3 p;
      if (i % 50 == 49) {
        p = centers[i - 1];  // exact duplicate
      } else if (i % 25 == 0) {
        p = Vec3(std::round(g(rng) * 4.0), std::round(g(rng) * 4.0), 0.0) * 0.01;  // lattice ties
      } else {
        p = blobs[i % blobs.size()] + 0.03 * Vec3(g(rng), g(rng), g(rng));
      }
      centers[i] = p;
      surfels[i].center = p;
      surfels[i].weight = 0.05 + 3.0 * unit(rng);
      ShColor sh;
      for (auto& x : sh.coeffs) x = g(rng);
      surfels[i].color = sh;
    }
    const NeighborTable table = knn(centers, k);
    const auto blended = blend_spatial(surfels, table, tau);
    // O(n^2) reference.
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<std::pair<double, std::uint32_t>> all(n);
      for (std::size_t j = 0; j < n; ++j) {
        const double dx = centers[i].x() - centers[j].x(), dy = centers[i].y() - centers[j].y(),
                     dz = centers[i].z() - centers[j].z();
        all[j] = {std::sqrt(dx * dx + dy * dy + dz * dz), std::uint32_t(j)};
      }
      std::sort(all.begin(), all.end());
      const auto nb = table.neighbors(i);
      const auto dist = table.distances(i);
      for (int j = 0; j < k; ++j) {
        if (nb[j] != all[j].second || dist[j] != all[j].first) ++table_mismatch;
      }
      // All-pairs blend over the exact neighbor set.
      ShColor expect;
      double den = 0.0;
      for (int j = 0; j < k; ++j) {
        const Surfel& sj = surfels[all[j].second];
        const double w = -std::expm1(-sj.weight) * std::exp(-tau * all[j].first);
        const auto& cj = std::get<ShColor>(sj.color).coeffs;
        for (int q = 0; q < kShColorCoeffs; ++q) expect.coeffs[q] += w * cj[q];
        den += w;
      }
      for (auto& x : expect.coeffs) x /= den;
      const auto& got = std::get<ShColor>(blended[i]).coeffs;
      for (int q = 0; q < kShColorCoeffs; ++q) {
        ++compared;
        if (got[q] != expect.coeffs[q]) ++blend_mismatch;
      }
    }
  }
  r.measured = double(table_mismatch + blend_mismatch);
  r.pass = table_mismatch == 0 && blend_mismatch == 0;
  r.detail = std::to_string(table_mismatch) + " k-NN table mismatches, " +
             std::to_string(blend_mismatch) + " of " + std::to_string(compared) +
             " blended values differ bitwise";
  r.seconds = seconds_since(t0);
  return r;
}

std::vector<CheckResult> run_verification(std::uint64_t seed) {
  return {check_footprint_closed_form(), check_opacity_clamp(),   check_fast_path(),
          check_refined_exactness(seed), check_merge(seed),       check_oplus_algebra(seed),
          check_gradients(seed),         check_continuity(),      check_spatial_blend(seed)};
}

std::string verification_report(const std::vector<CheckResult>& results) {
  nlohmann::json j;
  j["format"] = "gfs-verify";
  j["checks"] = nlohmann::json::array();
  bool all = true;
  for (const auto& r : results) {
    j["checks"].push_back({{"name", r.name},
                           {"measured", r.measured},
                           {"tolerance", r.tolerance},
                           {"pass", r.pass},
                           {"detail", r.detail},
                           {"seconds", r.seconds}});
    all = all && r.pass;
  }
  j["all_pass"] = all;
  return j.dump(2);
}

}  // namespace gfs
