#include "gfs/mathkernel.hpp"

#include <cmath>
#include <numbers>

#include "gfs/errors.hpp"

namespace gfs {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kLogSqrt2Pi = 0.91893853320467274178;

void require_finite(double x, const char* what) {
  if (!std::isfinite(x)) throw DomainError(std::string(what) + ": non-finite input");
}

void require_nonnegative(double x, const char* what) {
  require_finite(x, what);
  if (x < 0.0) throw DomainError(std::string(what) + ": negative input");
}

// Asymptotic expansion of ln Psi(x) for x << 0, used once erfc underflows.
double log_cdf_left_tail(double x) {
  const double inv2 = 1.0 / (x * x);
  const double series = 1.0 - inv2 * (1.0 - 3.0 * inv2 * (1.0 - 5.0 * inv2 * (1.0 - 7.0 * inv2)));
  return -0.5 * x * x - kLogSqrt2Pi - std::log(-x) + std::log(series);
}

}  // namespace

void FootprintConfig::validate() const {
  if (!(c > 0.0) || !std::isfinite(c)) throw ConfigError("footprint: c must be positive");
  if (!(f_max > 0.0) || !std::isfinite(f_max)) throw ConfigError("footprint: f_max must be positive");
  const double opacity = 1.0 - std::exp(-geometry_map(f_max, *this));
  if (opacity > 0.99 + 1e-3) {
    throw ConfigError("footprint: f_max gives clamped opacity above 0.991");
  }
}

double std_normal_pdf(double x) {
  return std::exp(-0.5 * x * x - kLogSqrt2Pi);
}

double std_normal_cdf(double x) {
  require_finite(x, "std_normal_cdf");
  // erfc keeps full relative precision in the left tail where 1 + erf cancels.
  return 0.5 * std::erfc(-x * kInvSqrt2);
}

double log_std_normal_cdf(double x) {
  require_finite(x, "log_std_normal_cdf");
  if (x > -30.0) return std::log(0.5 * std::erfc(-x * kInvSqrt2));
  return log_cdf_left_tail(x);
}

double normal_pdf_cdf_ratio(double x) {
  require_finite(x, "normal_pdf_cdf_ratio");
  if (x >= -6.0) return std_normal_pdf(x) / std_normal_cdf(x);
  return std::exp(-0.5 * x * x - kLogSqrt2Pi - log_std_normal_cdf(x));
}

double geometry_map(double u, const FootprintConfig& cfg) {
  require_nonnegative(u, "geometry_map");
  if (cfg.fast_path) return kFastPathScale * std::pow(u, kFastPathExponent);
  double s = -2.0 * log_std_normal_cdf(cfg.c - u);
  if (cfg.normalize_s0) s += 2.0 * log_std_normal_cdf(cfg.c);
  return s;
}

double footprint(double f, const FootprintConfig& cfg) {
  require_nonnegative(f, "footprint");
  return geometry_map(std::min(f, cfg.f_max), cfg);
}

double footprint_grad(double f, const FootprintConfig& cfg) {
  require_nonnegative(f, "footprint_grad");
  if (f > cfg.f_max) return 0.0;
  if (cfg.fast_path) {
    return kFastPathScale * kFastPathExponent * std::pow(f, kFastPathExponent - 1.0);
  }
  return 2.0 * normal_pdf_cdf_ratio(cfg.c - f);
}

double footprint_opacity(double f, const FootprintConfig& cfg) {
  return -std::expm1(-footprint(f, cfg));
}

double s_inverse(double v, const FootprintConfig& cfg) {
  require_nonnegative(v, "s_inverse");
  const double s0 = geometry_map(0.0, cfg);
  if (v < s0) throw DomainError("s_inverse: value below S(0)");
  if (v == s0) return 0.0;

  double lo = 0.0;
  double hi = cfg.f_max + 10.0;
  while (geometry_map(hi, cfg) < v) {
    lo = hi;
    hi *= 2.0;
  }
  for (int it = 0; it < 200 && hi - lo > 1e-13 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (geometry_map(mid, cfg) < v) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double oplus(double a, double b, const FootprintConfig& cfg) {
  require_nonnegative(a, "oplus");
  require_nonnegative(b, "oplus");
  return s_inverse(geometry_map(a, cfg) + geometry_map(b, cfg), cfg);
}

}  // namespace gfs
