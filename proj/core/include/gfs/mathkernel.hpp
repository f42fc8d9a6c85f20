#pragma once

// Scalar special functions and the footprint / merge algebra of the
// geometry field.
//
// A surfel hit with kernel value f contributes optical depth
//
//     S(f) = -2 ln Psi(c - f)                 (unnormalized)
//     S(f) = -2 ln (Psi(c - f) / Psi(c))      (normalized, S(0) = 0)
//
// where Psi is the standard normal CDF. `footprint` evaluates S at the
// clamped value min(f, f_max); `oplus` merges coincident kernel values so
// that their footprints add.

namespace gfs {

inline constexpr double kFastPathScale = 0.03279;
inline constexpr double kFastPathExponent = 3.4;

struct FootprintConfig {
  double c = 3.0;
  double f_max = 4.28;
  bool fast_path = false;
  bool normalize_s0 = true;

  /// Throws ConfigError if c <= 0, f_max <= 0, or the clamped opacity
  /// 1 - exp(-S(f_max)) exceeds 0.991.
  void validate() const;
};

double std_normal_pdf(double x);

/// Psi(x) = 0.5 (1 + erf(x / sqrt 2)). Throws DomainError on non-finite x.
double std_normal_cdf(double x);

/// ln Psi(x), accurate in the far left tail.
double log_std_normal_cdf(double x);

/// psi(x) / Psi(x). Evaluated in log space below x = -6.
double normal_pdf_cdf_ratio(double x);

/// S(u) without the f_max clamp; the map that `oplus` and `s_inverse` use.
double geometry_map(double u, const FootprintConfig& cfg);

/// rho = S(min(f, f_max)). Throws DomainError for f < 0.
double footprint(double f, const FootprintConfig& cfg);

/// d rho / d f; zero above the clamp.
double footprint_grad(double f, const FootprintConfig& cfg);

/// Opacity 1 - exp(-rho) of a kernel value.
double footprint_opacity(double f, const FootprintConfig& cfg);

/// u with S(u) = v, by bisection on the unclamped map.
double s_inverse(double v, const FootprintConfig& cfg);

/// a (+) b = S^-1(S(a) + S(b)).
double oplus(double a, double b, const FootprintConfig& cfg);

}  // namespace gfs
