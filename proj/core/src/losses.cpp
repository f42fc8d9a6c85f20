#include "gfs/losses.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <optional>

#include "gfs/errors.hpp"

namespace gfs {

void LossConfig::validate() const {
  if (lambda1 < 0.0 || lambda2 < 0.0) throw ConfigError("loss: weights must be non-negative");
  if (!(rgb_mix >= 0.0 && rgb_mix <= 1.0)) throw ConfigError("loss: rgb_mix must lie in [0, 1]");
}

namespace {

std::array<double, kSsimWindow> gaussian_window() {
  std::array<double, kSsimWindow> w{};
  double sum = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = i - kSsimWindow / 2;
    w[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
    sum += w[i];
  }
  for (auto& x : w) x /= sum;
  return w;
}

// Separable "same" convolution of one channel plane with zero padding. The
// kernel is symmetric, so this is also its own adjoint.
std::vector<double> blur(const std::vector<double>& in, int width, int height) {
  static const auto w = gaussian_window();
  constexpr int r = kSsimWindow / 2;
  std::vector<double> tmp(in.size(), 0.0), out(in.size(), 0.0);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double acc = 0.0;
      for (int k = -r; k <= r; ++k) {
        const int xx = x + k;
        if (xx >= 0 && xx < width) acc += w[k + r] * in[std::size_t(y) * width + xx];
      }
      tmp[std::size_t(y) * width + x] = acc;
    }
  }
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double acc = 0.0;
      for (int k = -r; k <= r; ++k) {
        const int yy = y + k;
        if (yy >= 0 && yy < height) acc += w[k + r] * tmp[std::size_t(yy) * width + x];
      }
      out[std::size_t(y) * width + x] = acc;
    }
  }
  return out;
}

std::vector<double> plane(std::span<const double> img, int channels, int c) {
  std::vector<double> out(img.size() / channels);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = img[i * channels + c];
  return out;
}

void check_shapes(std::span<const double> a, std::span<const double> b, int width, int height,
                  int channels) {
  if (width <= 0 || height <= 0 || channels <= 0 ||
      a.size() != std::size_t(width) * height * channels || b.size() != a.size()) {
    throw ContractViolation("loss: image shapes do not match");
  }
}

// Mean SSIM; when `grad` is non-null it receives d SSIM / d x scaled by
// `scale`.
double ssim_impl(std::span<const double> x, std::span<const double> y, int width, int height,
                 int channels, double scale, std::vector<double>* grad) {
  const std::size_t P = std::size_t(width) * height;
  const double inv_n = 1.0 / double(P * channels);
  double total = 0.0;
  for (int c = 0; c < channels; ++c) {
    const auto xp = plane(x, channels, c), yp = plane(y, channels, c);
    std::vector<double> xx(P), yy(P), xy(P);
    for (std::size_t i = 0; i < P; ++i) {
      xx[i] = xp[i] * xp[i];
      yy[i] = yp[i] * yp[i];
      xy[i] = xp[i] * yp[i];
    }
    const auto mx = blur(xp, width, height), my = blur(yp, width, height);
    const auto exx = blur(xx, width, height), eyy = blur(yy, width, height),
               exy = blur(xy, width, height);
    std::vector<double> g_mu(P), g_exx(P), g_exy(P);
    for (std::size_t i = 0; i < P; ++i) {
      const double a1 = 2.0 * mx[i] * my[i] + kSsimC1;
      const double a2 = 2.0 * (exy[i] - mx[i] * my[i]) + kSsimC2;
      const double b1 = mx[i] * mx[i] + my[i] * my[i] + kSsimC1;
      const double b2 = (exx[i] - mx[i] * mx[i]) + (eyy[i] - my[i] * my[i]) + kSsimC2;
      const double s = a1 * a2 / (b1 * b2);
      total += s;
      if (grad) {
        const double bb = b1 * b2;
        g_mu[i] = (2.0 * my[i] * a2 - 2.0 * my[i] * a1) / bb - 2.0 * mx[i] * s / b1 +
                  2.0 * mx[i] * s / b2;
        g_exx[i] = -s / b2;
        g_exy[i] = 2.0 * a1 / bb;
      }
    }
    if (grad) {
      const auto bmu = blur(g_mu, width, height), bexx = blur(g_exx, width, height),
                 bexy = blur(g_exy, width, height);
      for (std::size_t i = 0; i < P; ++i) {
        (*grad)[i * channels + c] +=
            scale * inv_n * (bmu[i] + 2.0 * xp[i] * bexx[i] + yp[i] * bexy[i]);
      }
    }
  }
  return total * inv_n;
}

}  // namespace

double ssim(std::span<const double> x, std::span<const double> y, int width, int height,
            int channels) {
  check_shapes(x, y, width, height, channels);
  return ssim_impl(x, y, width, height, channels, 0.0, nullptr);
}

ScalarLoss loss_rgb(std::span<const double> rendered, std::span<const double> target, int width,
                    int height, int channels, double mix) {
  check_shapes(rendered, target, width, height, channels);
  ScalarLoss out;
  out.grad.assign(rendered.size(), 0.0);
  const double inv_n = 1.0 / double(rendered.size());
  double l1 = 0.0;
  for (std::size_t i = 0; i < rendered.size(); ++i) {
    const double d = rendered[i] - target[i];
    l1 += std::abs(d);
    out.grad[i] = (1.0 - mix) * inv_n * double((d > 0.0) - (d < 0.0));
  }
  l1 *= inv_n;
  double s = 1.0;
  if (mix > 0.0) s = ssim_impl(rendered, target, width, height, channels, -mix, &out.grad);
  out.value = (1.0 - mix) * l1 + mix * (1.0 - s);
  return out;
}

ScalarLoss loss_rgb(const Image& rendered, const Image& target, double mix) {
  if (!rendered.same_shape(target)) throw ContractViolation("loss_rgb: image shapes do not match");
  return loss_rgb(rendered.data, target.data, rendered.width, rendered.height, rendered.channels,
                  mix);
}

EntryLoss loss_depth_distortion(const RenderBuffers& buffers) {
  const ForwardCache& cache = buffers.cache;
  if (!cache.valid) throw ContractViolation("loss_depth_distortion: render has no forward cache");
  EntryLoss out;
  out.d_weight.assign(cache.entries.size(), 0.0);
  out.d_depth.assign(cache.entries.size(), 0.0);
  const std::size_t P = buffers.pixels();
  if (P == 0) return out;
  const double inv_p = 1.0 / double(P);
  std::vector<std::size_t> order;
  for (std::size_t p = 0; p < P; ++p) {
    const auto entries = cache.pixel(p);
    const std::size_t n = entries.size(), base = cache.pixel_offset[p];
    if (n < 2) continue;
    order.resize(n);
    std::iota(order.begin(), order.end(), std::size_t(0));
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return entries[a].t < entries[b].t; });
    // With entries sorted by t: sum_{i,j} w_i w_j |t_i - t_j|
    //   = 2 sum_i w_i (t_i W_<i - WT_<i).
    double w_total = 0.0, wt_total = 0.0;
    for (const auto& e : entries) {
      w_total += e.weight;
      wt_total += e.weight * e.t;
    }
    double w_before = 0.0, wt_before = 0.0, value = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      const std::size_t i = order[r];
      const double w = entries[i].weight, t = entries[i].t;
      const double w_after = w_total - w_before - w, wt_after = wt_total - wt_before - w * t;
      // sum_j w_j |t - t_j| and sum_j w_j sign(t - t_j)
      const double abs_sum = (t * w_before - wt_before) + (wt_after - t * w_after);
      const double sign_sum = w_before - w_after;
      value += w * (t * w_before - wt_before);
      out.d_weight[base + i] = 2.0 * abs_sum * inv_p;
      out.d_depth[base + i] = 2.0 * w * sign_sum * inv_p;
      w_before += w;
      wt_before += w * t;
    }
    out.value += 2.0 * value * inv_p;
  }
  return out;
}

namespace {

struct DepthPoints {
  std::vector<Vec3> point;
  std::vector<Vec3> dir;
};

DepthPoints back_project(const RenderBuffers& b, const Camera& cam) {
  DepthPoints dp;
  dp.point.resize(b.pixels());
  dp.dir.resize(b.pixels());
  for (int y = 0; y < b.height; ++y) {
    for (int x = 0; x < b.width; ++x) {
      const std::size_t p = std::size_t(y) * b.width + x;
      dp.dir[p] = cam.direction_at(x + 0.5, y + 0.5);
      dp.point[p] = cam.origin() + b.depth[p] * dp.dir[p];
    }
  }
  return dp;
}

// Unnormalized depth normal c = dPx x dPy at an interior pixel with valid
// neighbors; nullopt when masked.
struct CrossTerm {
  Vec3 a, b, c;
  double sign;
};

std::optional<CrossTerm> cross_at(const RenderBuffers& buf, const DepthPoints& dp, int x, int y) {
  const int W = buf.width;
  if (x < 1 || y < 1 || x + 1 >= W || y + 1 >= buf.height) return std::nullopt;
  const std::size_t p = std::size_t(y) * W + x;
  if (!buf.depth_valid[p] || !buf.depth_valid[p - 1] || !buf.depth_valid[p + 1] ||
      !buf.depth_valid[p - W] || !buf.depth_valid[p + W]) {
    return std::nullopt;
  }
  CrossTerm ct;
  ct.a = dp.point[p + 1] - dp.point[p - 1];
  ct.b = dp.point[p + W] - dp.point[p - W];
  ct.c = ct.a.cross(ct.b);
  const double len = ct.c.norm();
  if (!(len > 1e-12 * (ct.a.squaredNorm() + ct.b.squaredNorm()))) return std::nullopt;
  ct.sign = ct.c.dot(dp.dir[p]) > 0.0 ? -1.0 : 1.0;
  return ct;
}

}  // namespace

std::vector<double> depth_normals(const RenderBuffers& buffers, const Camera& camera) {
  std::vector<double> out(3 * buffers.pixels(), 0.0);
  const auto dp = back_project(buffers, camera);
  for (int y = 0; y < buffers.height; ++y) {
    for (int x = 0; x < buffers.width; ++x) {
      if (auto ct = cross_at(buffers, dp, x, y)) {
        const Vec3 n = ct->sign * ct->c.normalized();
        const std::size_t p = std::size_t(y) * buffers.width + x;
        for (int k = 0; k < 3; ++k) out[3 * p + k] = n[k];
      }
    }
  }
  return out;
}

NormalLoss loss_normal_consistency(const RenderBuffers& buffers, const Camera& camera) {
  const ForwardCache& cache = buffers.cache;
  if (!cache.valid) throw ContractViolation("loss_normal_consistency: render has no forward cache");
  NormalLoss out;
  out.d_weight.assign(cache.entries.size(), 0.0);
  out.d_normal.assign(cache.entries.size(), Vec3::Zero());
  out.d_depth.assign(buffers.pixels(), 0.0);
  const auto dp = back_project(buffers, camera);
  const int W = buffers.width;

  std::vector<std::pair<std::size_t, CrossTerm>> valid;
  for (int y = 0; y < buffers.height; ++y) {
    for (int x = 0; x < W; ++x) {
      if (auto ct = cross_at(buffers, dp, x, y)) valid.emplace_back(std::size_t(y) * W + x, *ct);
    }
  }
  out.valid_pixels = valid.size();
  if (valid.empty()) return out;
  const double inv_v = 1.0 / double(valid.size());

  std::vector<Vec3> d_point(buffers.pixels(), Vec3::Zero());
  for (const auto& [p, ct] : valid) {
    const double len = ct.c.norm();
    const Vec3 chat = ct.c / len;
    const Vec3 N = ct.sign * chat;
    const auto entries = cache.pixel(p);
    const std::size_t base = cache.pixel_offset[p];
    Vec3 gN = Vec3::Zero();
    double value = 0.0;
    for (std::size_t e = 0; e < entries.size(); ++e) {
      const double cosine = entries[e].normal.dot(N);
      value += entries[e].weight * (1.0 - cosine);
      out.d_weight[base + e] = (1.0 - cosine) * inv_v;
      out.d_normal[base + e] = -entries[e].weight * N * inv_v;
      gN -= entries[e].weight * entries[e].normal * inv_v;
    }
    out.value += value * inv_v;
    const Vec3 g_chat = ct.sign * gN;
    const Vec3 gc = (g_chat - g_chat.dot(chat) * chat) / len;
    const Vec3 ga = ct.b.cross(gc);
    const Vec3 gb = gc.cross(ct.a);
    d_point[p + 1] += ga;
    d_point[p - 1] -= ga;
    d_point[p + W] += gb;
    d_point[p - W] -= gb;
  }
  for (std::size_t p = 0; p < buffers.pixels(); ++p) out.d_depth[p] = d_point[p].dot(dp.dir[p]);
  return out;
}

LossTerms total_loss(const RenderBuffers& buffers, const Camera& camera, const Image& target,
                     const LossConfig& cfg, PixelGradients* grads) {
  cfg.validate();
  if (target.width != buffers.width || target.height != buffers.height || target.channels != 3) {
    throw ContractViolation("total_loss: target does not match the render");
  }
  LossTerms terms;
  const auto rgb = loss_rgb(buffers.color, target.data, buffers.width, buffers.height, 3, cfg.rgb_mix);
  terms.rgb = rgb.value;
  const std::size_t E = buffers.cache.entries.size();
  if (grads) {
    grads->color = rgb.grad;
    grads->depth.assign(buffers.pixels(), 0.0);
    grads->entry_weight.assign(E, 0.0);
    grads->entry_depth.assign(E, 0.0);
    grads->entry_normal.assign(E, Vec3::Zero());
  }
  if (cfg.lambda1 > 0.0) {
    const auto ld = loss_depth_distortion(buffers);
    terms.distortion = ld.value;
    if (grads) {
      for (std::size_t e = 0; e < E; ++e) {
        grads->entry_weight[e] += cfg.lambda1 * ld.d_weight[e];
        grads->entry_depth[e] += cfg.lambda1 * ld.d_depth[e];
      }
    }
  }
  if (cfg.lambda2 > 0.0) {
    const auto ln = loss_normal_consistency(buffers, camera);
    terms.normal = ln.value;
    if (grads) {
      for (std::size_t e = 0; e < E; ++e) {
        grads->entry_weight[e] += cfg.lambda2 * ln.d_weight[e];
        grads->entry_normal[e] += cfg.lambda2 * ln.d_normal[e];
      }
      for (std::size_t p = 0; p < buffers.pixels(); ++p) grads->depth[p] += cfg.lambda2 * ln.d_depth[p];
    }
  }
  terms.total = terms.rgb + cfg.lambda1 * terms.distortion + cfg.lambda2 * terms.normal;
  return terms;
}

}  // namespace gfs
