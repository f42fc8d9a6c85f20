#include "gfs/shading.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gfs/errors.hpp"

namespace gfs {

ShColor ShColor::from_rgb(const Rgb& rgb) {
  ShColor out;
  for (int ch = 0; ch < 3; ++ch) out.coeffs[ch] = (rgb[ch] - 0.5) / kShC0;
  return out;
}

ColorKind kind_of(const ColorAttr& attr) {
  return std::holds_alternative<ShColor>(attr) ? ColorKind::kSh : ColorKind::kLatent;
}

std::span<double> attr_values(ColorAttr& attr) {
  if (auto* sh = std::get_if<ShColor>(&attr)) return sh->coeffs;
  return std::get<LatentColor>(attr).latent;
}

std::span<const double> attr_values(const ColorAttr& attr) {
  if (const auto* sh = std::get_if<ShColor>(&attr)) return sh->coeffs;
  return std::get<LatentColor>(attr).latent;
}

int attr_dim(ColorKind kind) { return kind == ColorKind::kSh ? kShColorCoeffs : kLatentDim; }

ColorAttr make_attr(ColorKind kind) {
  if (kind == ColorKind::kSh) return ShColor{};
  return LatentColor{};
}

int sh_basis_count(int degree) { return degree * degree; }

namespace {

void check_degree(int degree) {
  if (degree < 1 || degree > 5) throw DomainError("sh encoding degree must be in [1, 5]");
}

void check_unit(const Vec3& d, double tol, const char* what) {
  if (!d.allFinite() || std::abs(d.norm() - 1.0) > tol) {
    throw DomainError(std::string(what) + ": expected a unit vector");
  }
}

// Values and raw (unprojected) polynomial gradients of the real SH basis.
void sh_basis(const Vec3& d, int degree, double* v, Vec3* g) {
  const double x = d.x(), y = d.y(), z = d.z();
  const double x2 = x * x, y2 = y * y, z2 = z * z;
  auto set = [&](int i, double value, double gx, double gy, double gz) {
    v[i] = value;
    if (g) g[i] = Vec3(gx, gy, gz);
  };

  set(0, 0.28209479177387814, 0, 0, 0);
  if (degree <= 1) return;

  constexpr double c1 = 0.48860251190291987;
  set(1, -c1 * y, 0, -c1, 0);
  set(2, c1 * z, 0, 0, c1);
  set(3, -c1 * x, -c1, 0, 0);
  if (degree <= 2) return;

  constexpr double c20 = 1.0925484305920792;
  constexpr double c22 = 0.94617469575756008;
  constexpr double c23 = 0.31539156525252005;
  constexpr double c24 = 0.54627421529603959;
  set(4, c20 * x * y, c20 * y, c20 * x, 0);
  set(5, -c20 * y * z, 0, -c20 * z, -c20 * y);
  set(6, c22 * z2 - c23, 0, 0, 2 * c22 * z);
  set(7, -c20 * x * z, -c20 * z, 0, -c20 * x);
  set(8, c24 * (x2 - y2), 2 * c24 * x, -2 * c24 * y, 0);
  if (degree <= 3) return;

  constexpr double c30 = 0.59004358992664352;
  constexpr double c31 = 2.8906114426405538;
  constexpr double c32 = 0.45704579946446572;
  constexpr double c33 = 0.3731763325901154;
  constexpr double c35 = 1.4453057213202769;
  set(9, c30 * y * (-3 * x2 + y2), -6 * c30 * x * y, c30 * (-3 * x2 + 3 * y2), 0);
  set(10, c31 * x * y * z, c31 * y * z, c31 * x * z, c31 * x * y);
  set(11, c32 * y * (1 - 5 * z2), 0, c32 * (1 - 5 * z2), -10 * c32 * y * z);
  set(12, c33 * z * (5 * z2 - 3), 0, 0, c33 * (15 * z2 - 3));
  set(13, c32 * x * (1 - 5 * z2), c32 * (1 - 5 * z2), 0, -10 * c32 * x * z);
  set(14, c35 * z * (x2 - y2), 2 * c35 * x * z, -2 * c35 * y * z, c35 * (x2 - y2));
  set(15, c30 * x * (-x2 + 3 * y2), c30 * (-3 * x2 + 3 * y2), 6 * c30 * x * y, 0);
  if (degree <= 4) return;

  constexpr double c40 = 2.5033429417967046;
  constexpr double c41 = 1.7701307697799304;
  constexpr double c42 = 0.94617469575756008;
  constexpr double c43 = 0.66904654355728921;
  constexpr double c44a = 3.1735664074561294;
  constexpr double c44b = 3.7024941420321507;
  constexpr double c44c = 0.31735664074561293;
  constexpr double c46 = 0.47308734787878004;
  constexpr double c48a = 3.7550144126950569;
  constexpr double c48b = 0.62583573544917614;
  set(16, c40 * x * y * (x2 - y2), c40 * (3 * x2 * y - y2 * y), c40 * (x2 * x - 3 * x * y2), 0);
  set(17, c41 * y * z * (-3 * x2 + y2), -6 * c41 * x * y * z, c41 * (-3 * x2 * z + 3 * y2 * z),
      c41 * (-3 * x2 * y + y2 * y));
  set(18, c42 * x * y * (7 * z2 - 1), c42 * y * (7 * z2 - 1), c42 * x * (7 * z2 - 1),
      14 * c42 * x * y * z);
  set(19, c43 * y * z * (7 * z2 - 3), 0, c43 * z * (7 * z2 - 3), c43 * y * (21 * z2 - 3));
  set(20, -c44a * z2 + c44b * z2 * z2 + c44c, 0, 0, -2 * c44a * z + 4 * c44b * z2 * z);
  set(21, c43 * x * z * (7 * z2 - 3), c43 * z * (7 * z2 - 3), 0, c43 * x * (21 * z2 - 3));
  set(22, c46 * (x2 - y2) * (7 * z2 - 1), 2 * c46 * x * (7 * z2 - 1), -2 * c46 * y * (7 * z2 - 1),
      14 * c46 * z * (x2 - y2));
  set(23, c41 * x * z * (-x2 + 3 * y2), c41 * (-3 * x2 * z + 3 * y2 * z), 6 * c41 * x * y * z,
      c41 * (-x2 * x + 3 * x * y2));
  set(24, -c48a * x2 * y2 + c48b * x2 * x2 + c48b * y2 * y2,
      -2 * c48a * x * y2 + 4 * c48b * x2 * x, -2 * c48a * x2 * y + 4 * c48b * y2 * y, 0);
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

std::vector<double> sh_encode_direction(const Vec3& d, int degree) {
  check_degree(degree);
  check_unit(d, 1e-6, "sh_encode_direction");
  std::vector<double> out(sh_basis_count(degree));
  sh_basis(d, degree, out.data(), nullptr);
  return out;
}

void sh_encode_with_grad(const Vec3& d, int degree, std::span<double> values,
                         std::span<Vec3> grads) {
  check_degree(degree);
  check_unit(d, 1e-6, "sh_encode_with_grad");
  const int n = sh_basis_count(degree);
  if (int(values.size()) < n || int(grads.size()) < n) {
    throw ContractViolation("sh_encode_with_grad: output spans too small");
  }
  sh_basis(d, degree, values.data(), grads.data());
  for (int i = 0; i < n; ++i) grads[i] -= grads[i].dot(d) * d;
}

Vec3 reflect(const Vec3& omega, const Vec3& n) {
  check_unit(omega, 1e-6, "reflect");
  check_unit(n, 1e-6, "reflect");
  return 2.0 * n.dot(omega) * n - omega;
}

ShadingNet::ShadingNet(int encoding_degree, int hidden)
    : encoding_degree_(encoding_degree),
      input_dim_(kLatentDim + 2 * sh_basis_count(encoding_degree)),
      hidden_(hidden) {
  check_degree(encoding_degree);
  params_.assign(b3() + 3, 0.0);
}

void ShadingNet::init_random(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto fill = [&](std::size_t offset, std::size_t count, int fan_in) {
    const double bound = std::sqrt(6.0 / fan_in);
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t i = 0; i < count; ++i) params_[offset + i] = dist(rng);
  };
  std::fill(params_.begin(), params_.end(), 0.0);
  fill(w1(), std::size_t(hidden_) * input_dim_, input_dim_);
  fill(w2(), std::size_t(hidden_) * hidden_, hidden_);
  // Small output layer so the head starts near sigmoid(0) = 0.5.
  std::uniform_real_distribution<double> out(-1e-2, 1e-2);
  for (std::size_t i = 0; i < 3 * std::size_t(hidden_); ++i) params_[w3() + i] = out(rng);
}

Rgb ShadingNet::forward(std::span<const double> input, Cache* cache) const {
  if (int(input.size()) != input_dim_) throw ContractViolation("ShadingNet: wrong input size");
  std::vector<double> h1(hidden_), h2(hidden_);
  const double* p = params_.data();
  for (int j = 0; j < hidden_; ++j) {
    double acc = p[b1() + j];
    const double* row = p + w1() + std::size_t(j) * input_dim_;
    for (int i = 0; i < input_dim_; ++i) acc += row[i] * input[i];
    h1[j] = acc > 0.0 ? acc : 0.0;
  }
  for (int j = 0; j < hidden_; ++j) {
    double acc = p[b2() + j];
    const double* row = p + w2() + std::size_t(j) * hidden_;
    for (int i = 0; i < hidden_; ++i) acc += row[i] * h1[i];
    h2[j] = acc > 0.0 ? acc : 0.0;
  }
  Rgb out;
  for (int k = 0; k < 3; ++k) {
    double acc = p[b3() + k];
    const double* row = p + w3() + std::size_t(k) * hidden_;
    for (int i = 0; i < hidden_; ++i) acc += row[i] * h2[i];
    out[k] = sigmoid(acc);
  }
  if (cache) {
    cache->input.assign(input.begin(), input.end());
    cache->hidden1 = std::move(h1);
    cache->hidden2 = std::move(h2);
    cache->output = out;
    cache->valid = true;
  }
  return out;
}

void ShadingNet::backward(const Cache& cache, const Rgb& d_rgb, std::span<double> param_grad,
                          std::span<double> input_grad) const {
  if (!cache.valid) throw ContractViolation("ShadingNet::backward: missing forward cache");
  if (param_grad.size() != params_.size() || int(input_grad.size()) != input_dim_) {
    throw ContractViolation("ShadingNet::backward: gradient span size mismatch");
  }
  const double* p = params_.data();
  double* g = param_grad.data();

  std::array<double, 3> d_out;
  for (int k = 0; k < 3; ++k) d_out[k] = d_rgb[k] * cache.output[k] * (1.0 - cache.output[k]);

  std::vector<double> d_h2(hidden_, 0.0), d_h1(hidden_, 0.0);
  for (int k = 0; k < 3; ++k) {
    g[b3() + k] += d_out[k];
    const double* row = p + w3() + std::size_t(k) * hidden_;
    double* grow = g + w3() + std::size_t(k) * hidden_;
    for (int i = 0; i < hidden_; ++i) {
      grow[i] += d_out[k] * cache.hidden2[i];
      d_h2[i] += d_out[k] * row[i];
    }
  }
  for (int j = 0; j < hidden_; ++j) {
    if (cache.hidden2[j] <= 0.0) continue;
    const double dj = d_h2[j];
    g[b2() + j] += dj;
    const double* row = p + w2() + std::size_t(j) * hidden_;
    double* grow = g + w2() + std::size_t(j) * hidden_;
    for (int i = 0; i < hidden_; ++i) {
      grow[i] += dj * cache.hidden1[i];
      d_h1[i] += dj * row[i];
    }
  }
  std::fill(input_grad.begin(), input_grad.end(), 0.0);
  for (int j = 0; j < hidden_; ++j) {
    if (cache.hidden1[j] <= 0.0) continue;
    const double dj = d_h1[j];
    g[b1() + j] += dj;
    const double* row = p + w1() + std::size_t(j) * input_dim_;
    double* grow = g + w1() + std::size_t(j) * input_dim_;
    for (int i = 0; i < input_dim_; ++i) {
      grow[i] += dj * cache.input[i];
      input_grad[i] += dj * row[i];
    }
  }
}

void net_backward(const ShadingNet& net, const ShadingNet::Cache& cache, const Rgb& d_rgb,
                  std::span<double> param_grad, std::span<double> input_grad) {
  net.backward(cache, d_rgb, param_grad, input_grad);
}

Rgb eval_color(const ColorAttr& attr, const Vec3& center, const Vec3& camera_origin,
               const Vec3& normal, const ShadingNet* net, ShadingCache* cache) {
  const Vec3 offset = center - camera_origin;
  const double distance = offset.norm();
  const Vec3 omega = distance > 0.0 ? Vec3(offset / distance) : Vec3(0.0, 0.0, 1.0);
  if (cache) {
    cache->omega = omega;
    cache->distance = distance;
    cache->normal = normal;
  }

  if (const auto* sh = std::get_if<ShColor>(&attr)) {
    std::array<double, kShColorBasis> basis;
    sh_basis(omega, 4, basis.data(), nullptr);
    Rgb raw = Rgb::Constant(0.5);
    for (int k = 0; k < kShColorBasis; ++k) {
      for (int ch = 0; ch < 3; ++ch) raw[ch] += sh->coeffs[k * 3 + ch] * basis[k];
    }
    if (cache) cache->raw = raw;
    return raw.cwiseMax(0.0).cwiseMin(1.0);
  }

  if (!net) throw ConfigError("eval_color: latent color requires a shading net");
  const auto& latent = std::get<LatentColor>(attr).latent;
  const int nb = sh_basis_count(net->encoding_degree());
  std::vector<double> input(net->input_dim());
  std::copy(latent.begin(), latent.end(), input.begin());
  const Vec3 omega_o = 2.0 * normal.dot(omega) * normal - omega;
  sh_basis(omega, net->encoding_degree(), input.data() + kLatentDim, nullptr);
  sh_basis(omega_o, net->encoding_degree(), input.data() + kLatentDim + nb, nullptr);
  return net->forward(input, cache ? &cache->net : nullptr);
}

void eval_color_backward(const ColorAttr& attr, const ShadingCache& cache, const Rgb& d_rgb,
                         const ShadingNet* net, ShadingGrad& out, std::span<double> net_grad) {
  const Vec3& omega = cache.omega;
  Vec3 d_omega = Vec3::Zero();
  out.normal.setZero();

  if (const auto* sh = std::get_if<ShColor>(&attr)) {
    out.attr.assign(kShColorCoeffs, 0.0);
    std::array<double, kShColorBasis> basis;
    std::array<Vec3, kShColorBasis> grads;
    sh_basis(omega, 4, basis.data(), grads.data());
    Rgb d_raw;
    for (int ch = 0; ch < 3; ++ch) {
      d_raw[ch] = (cache.raw[ch] > 0.0 && cache.raw[ch] < 1.0) ? d_rgb[ch] : 0.0;
    }
    for (int k = 0; k < kShColorBasis; ++k) {
      double dk = 0.0;
      for (int ch = 0; ch < 3; ++ch) {
        out.attr[k * 3 + ch] = d_raw[ch] * basis[k];
        dk += d_raw[ch] * sh->coeffs[k * 3 + ch];
      }
      d_omega += dk * grads[k];
    }
  } else {
    if (!net) throw ConfigError("eval_color_backward: latent color requires a shading net");
    const int degree = net->encoding_degree();
    const int nb = sh_basis_count(degree);
    std::vector<double> d_input(net->input_dim());
    net->backward(cache.net, d_rgb, net_grad, d_input);
    out.attr.assign(d_input.begin(), d_input.begin() + kLatentDim);

    const Vec3& n = cache.normal;
    const Vec3 omega_o = 2.0 * n.dot(omega) * n - omega;
    std::vector<double> vals(nb);
    std::vector<Vec3> grads(nb);
    sh_basis(omega, degree, vals.data(), grads.data());
    for (int k = 0; k < nb; ++k) d_omega += d_input[kLatentDim + k] * grads[k];
    sh_basis(omega_o, degree, vals.data(), grads.data());
    Vec3 d_omega_o = Vec3::Zero();
    for (int k = 0; k < nb; ++k) d_omega_o += d_input[kLatentDim + nb + k] * grads[k];
    // omega_o = 2 (n . omega) n - omega
    const double go_n = d_omega_o.dot(n);
    d_omega += 2.0 * go_n * n - d_omega_o;
    out.normal = 2.0 * go_n * omega + 2.0 * n.dot(omega) * d_omega_o;
  }

  // omega = (m - o) / |m - o|
  if (cache.distance > 0.0) {
    out.center = (d_omega - d_omega.dot(omega) * omega) / cache.distance;
  } else {
    out.center.setZero();
  }
}

}  // namespace gfs
