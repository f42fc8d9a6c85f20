#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <variant>
#include <vector>

#include "gfs/geometry.hpp"

namespace gfs {

inline constexpr int kShColorBasis = 16;              // degree-3 color SH
inline constexpr int kShColorCoeffs = 3 * kShColorBasis;
inline constexpr int kLatentDim = 32;
inline constexpr double kShC0 = 0.28209479177387814;  // Y_0^0

/// Degree-3 SH color. Stored basis-major: coeffs[k * 3 + channel].
struct ShColor {
  std::array<double, kShColorCoeffs> coeffs{};

  /// DC-only coefficients that evaluate to `rgb` in every direction.
  static ShColor from_rgb(const Rgb& rgb);
};

struct LatentColor {
  std::array<double, kLatentDim> latent{};
};

using ColorAttr = std::variant<ShColor, LatentColor>;

enum class ColorKind : std::uint32_t { kSh = 0, kLatent = 1 };

ColorKind kind_of(const ColorAttr& attr);
std::span<double> attr_values(ColorAttr& attr);
std::span<const double> attr_values(const ColorAttr& attr);
int attr_dim(ColorKind kind);
ColorAttr make_attr(ColorKind kind);

/// Number of SH basis functions for an encoding "degree" in the
/// band-count convention: degree 4 -> 16 functions (l <= 3), 5 -> 25.
int sh_basis_count(int degree);

/// Real SH basis values Y_l^m(d) for l < degree. Throws DomainError when
/// |d| deviates from 1 by more than 1e-6 or degree is not in [1, 5].
std::vector<double> sh_encode_direction(const Vec3& d, int degree = 4);

/// Basis values plus their gradients with respect to d (projected onto the
/// tangent plane of the unit sphere at d). `values` and `grads` must hold
/// sh_basis_count(degree) entries.
void sh_encode_with_grad(const Vec3& d, int degree, std::span<double> values,
                         std::span<Vec3> grads);

/// omega_o = 2 (n . omega) n - omega.
Vec3 reflect(const Vec3& omega, const Vec3& n);

/// Shallow MLP: [latent, SE(omega), SE(omega_o)] -> ReLU(64) -> ReLU(64) ->
/// sigmoid(3).
class ShadingNet {
 public:
  static constexpr int kHidden = 64;

  ShadingNet() = default;
  explicit ShadingNet(int encoding_degree, int hidden = kHidden);

  void init_random(std::uint64_t seed);

  int encoding_degree() const { return encoding_degree_; }
  int input_dim() const { return input_dim_; }
  int hidden() const { return hidden_; }
  std::size_t parameter_count() const { return params_.size(); }
  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }

  /// Intermediate activations kept for net_backward.
  struct Cache {
    std::vector<double> input;
    std::vector<double> hidden1;  // post-ReLU
    std::vector<double> hidden2;  // post-ReLU
    Rgb output = Rgb::Zero();
    bool valid = false;
  };

  Rgb forward(std::span<const double> input, Cache* cache = nullptr) const;

  /// Accumulates d L / d params into `param_grad` (same layout as
  /// parameters()) and writes d L / d input into `input_grad`.
  void backward(const Cache& cache, const Rgb& d_rgb, std::span<double> param_grad,
                std::span<double> input_grad) const;

 private:
  // Layout: W1 (h x in), b1 (h), W2 (h x h), b2 (h), W3 (3 x h), b3 (3).
  std::size_t w1() const { return 0; }
  std::size_t b1() const { return w1() + std::size_t(hidden_) * input_dim_; }
  std::size_t w2() const { return b1() + hidden_; }
  std::size_t b2() const { return w2() + std::size_t(hidden_) * hidden_; }
  std::size_t w3() const { return b2() + hidden_; }
  std::size_t b3() const { return w3() + 3 * std::size_t(hidden_); }

  int encoding_degree_ = 4;
  int input_dim_ = 0;
  int hidden_ = kHidden;
  std::vector<double> params_;
};

/// Per-surfel, per-view shading inputs and the data backward needs.
struct ShadingCache {
  Vec3 omega = Vec3::Zero();     // unit direction camera -> surfel center
  double distance = 0.0;         // |m - o|
  Vec3 normal = Vec3::Zero();
  Rgb raw = Rgb::Zero();         // SH value before clamping
  ShadingNet::Cache net;
};

/// c_i = Phi(attr, omega, n). SH variant: clamp(sum_k coeff_k Y_k(omega) +
/// 0.5, 0, 1). Latent variant: MLP. Throws ConfigError for a latent attribute
/// without a net.
Rgb eval_color(const ColorAttr& attr, const Vec3& center, const Vec3& camera_origin,
               const Vec3& normal, const ShadingNet* net, ShadingCache* cache = nullptr);

/// Gradients of one shaded color.
struct ShadingGrad {
  std::vector<double> attr;      // d L / d attr values
  Vec3 center = Vec3::Zero();    // via omega
  Vec3 normal = Vec3::Zero();    // via omega_o (latent only)
};

/// Back-propagates d L / d rgb through eval_color. Net parameter gradients
/// are accumulated into `net_grad` when the attribute is latent.
void eval_color_backward(const ColorAttr& attr, const ShadingCache& cache, const Rgb& d_rgb,
                         const ShadingNet* net, ShadingGrad& out,
                         std::span<double> net_grad);

/// Gradients of the MLP head alone. Throws ContractViolation without a valid
/// cache.
void net_backward(const ShadingNet& net, const ShadingNet::Cache& cache, const Rgb& d_rgb,
                  std::span<double> param_grad, std::span<double> input_grad);

}  // namespace gfs
