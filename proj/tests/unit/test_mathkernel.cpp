#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "gfs/errors.hpp"
#include "gfs/mathkernel.hpp"

namespace gfs {
namespace {

// Maclaurin series of erf, independent of libm.
double erf_series(double x) {
  double term = x, sum = x;
  for (int n = 1; n < 200; ++n) {
    term *= -x * x / n;
    sum += term / (2 * n + 1);
  }
  return 2.0 / std::sqrt(M_PI) * sum;
}

TEST(MathKernel, NormalCdfMatchesSeriesOracle) {
  for (double x = -4.0; x <= 4.0; x += 0.125) {
    const double expect = 0.5 * (1.0 + erf_series(x / std::sqrt(2.0)));
    EXPECT_NEAR(std_normal_cdf(x), expect, 1e-14) << x;
  }
}

TEST(MathKernel, NormalCdfSymmetry) {
  for (double x = 0.0; x < 8.0; x += 0.37) {
    EXPECT_NEAR(std_normal_cdf(x) + std_normal_cdf(-x), 1.0, 1e-15);
  }
}

TEST(MathKernel, LogCdfFarTail) {
  // Asymptotic: ln Psi(x) ~ -x^2/2 - ln(-x sqrt(2 pi)) for x -> -inf.
  const double x = -40.0;
  const double asym = -0.5 * x * x - std::log(-x * std::sqrt(2.0 * M_PI)) - 1.0 / (x * x);
  EXPECT_NEAR(log_std_normal_cdf(x), asym, 1e-5);
  EXPECT_TRUE(std::isfinite(log_std_normal_cdf(-1e3)));
}

TEST(MathKernel, RatioMatchesDirectQuotient) {
  for (double x = -5.0; x <= 5.0; x += 0.5) {
    EXPECT_NEAR(normal_pdf_cdf_ratio(x), std_normal_pdf(x) / std_normal_cdf(x), 1e-12);
  }
  // Continuity across the log-space switch.
  EXPECT_NEAR(normal_pdf_cdf_ratio(-6.0 - 1e-9), normal_pdf_cdf_ratio(-6.0 + 1e-9), 1e-6);
}

TEST(MathKernel, CdfRejectsNonFinite) {
  EXPECT_THROW(std_normal_cdf(std::nan("")), DomainError);
}

TEST(MathKernel, FootprintZeroAndMonotone) {
  FootprintConfig fp;
  EXPECT_NEAR(footprint(0.0, fp), 0.0, 1e-15);
  double prev = -1.0;
  for (double f = 0.0; f <= fp.f_max; f += 0.01) {
    const double v = footprint(f, fp);
    EXPECT_GT(v, prev);
    prev = v;
  }
}

TEST(MathKernel, FootprintClampedAboveFMax) {
  FootprintConfig fp;
  EXPECT_EQ(footprint(10.0, fp), footprint(fp.f_max, fp));
  EXPECT_EQ(footprint_grad(5.0, fp), 0.0);
  EXPECT_THROW(footprint(-0.1, fp), DomainError);
}

TEST(MathKernel, UnnormalizedDiffersByConstant) {
  FootprintConfig n, u;
  u.normalize_s0 = false;
  const double offset = -2.0 * std::log(std_normal_cdf(3.0));
  for (double f : {0.1, 1.0, 2.5, 4.0}) {
    EXPECT_NEAR(footprint(f, u) - footprint(f, n), offset, 1e-13);
  }
}

TEST(MathKernel, FootprintGradMatchesFiniteDifference) {
  FootprintConfig fp;
  for (double f = 0.05; f < 4.2; f += 0.1) {
    const double h = 1e-6;
    const double fd = (footprint(f + h, fp) - footprint(f - h, fp)) / (2 * h);
    EXPECT_NEAR(footprint_grad(f, fp), fd, 1e-7 * std::max(1.0, fd));
  }
}

TEST(MathKernel, OpacityAtClampNear099) {
  FootprintConfig fp;
  const double a = footprint_opacity(fp.f_max, fp);
  EXPECT_GE(a, 0.9890);
  EXPECT_LE(a, 0.9905);
}

TEST(MathKernel, SInverseRoundTrip) {
  FootprintConfig fp;
  for (double u = 0.0; u < 6.0; u += 0.25) {
    EXPECT_NEAR(s_inverse(geometry_map(u, fp), fp), u, 1e-9);
  }
}

TEST(MathKernel, OplusIdentityAndAlgebra) {
  FootprintConfig fp;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> d(0.0, 3.0);
  for (int i = 0; i < 200; ++i) {
    const double a = d(rng), b = d(rng);
    EXPECT_NEAR(oplus(a, 0.0, fp), a, 1e-10);
    EXPECT_EQ(oplus(a, b, fp), oplus(b, a, fp));
    EXPECT_GE(oplus(a, b, fp), std::max(a, b));
  }
}

TEST(MathKernel, FastPathTracksExactShape) {
  FootprintConfig fast, exact;
  fast.fast_path = true;
  EXPECT_NEAR(footprint(1.0, fast), kFastPathScale, 1e-15);
  // Large-f agreement is good; the small-f relative error is not bounded.
  EXPECT_NEAR(footprint(4.0, fast) / footprint(4.0, exact), 1.0, 0.05);
}

TEST(MathKernel, ConfigValidation) {
  FootprintConfig fp;
  EXPECT_NO_THROW(fp.validate());
  fp.f_max = 6.0;
  EXPECT_THROW(fp.validate(), ConfigError);
  fp = {};
  fp.c = 0.0;
  EXPECT_THROW(fp.validate(), ConfigError);
}

}  // namespace
}  // namespace gfs
