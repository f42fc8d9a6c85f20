#pragma once

// Property checks that certify the closed forms against brute-force
// references. Each check reports its measured error against a tolerance.

#include <cstdint>
#include <string>
#include <vector>

namespace gfs {

struct CheckResult {
  std::string name;
  double measured = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

/// Quadrature footprint vs -2 ln Psi(c - f) (unnormalized), plus
/// h-independence over h in {1e-2, 1e-3, 1e-4}.
CheckResult check_footprint_closed_form();

/// 1 - exp(-footprint(f_max)) in [0.9890, 0.9905].
CheckResult check_opacity_clamp();

/// Max pointwise relative deviation of the fast-path footprint from the
/// exact normalized footprint over [0.05, f_max], bound 5%.
CheckResult check_fast_path();

/// Refined compositing vs quadrature rendering on random depth-separated
/// rays (<= 6 surfels), per channel <= 1e-6; also reports the classic
/// backend's largest error on rays with f > 1 (must reach 1e-2).
CheckResult check_refined_exactness(std::uint64_t seed, int rays = 1000);

/// Classic compositing on the same rays; passes when its bias against the
/// quadrature reaches 1e-2 (the exactness check is expected to fail).
CheckResult check_classic_bias(std::uint64_t seed, int rays = 1000);

/// Quadrature footprint at a single f vs -2 ln Psi(c - f).
CheckResult check_footprint_at(double f);

/// Merged vs unmerged compositing of coincident equal-color runs, <= 1e-12.
CheckResult check_merge(std::uint64_t seed, int runs = 1000);

/// Commutativity (exact), associativity and footprint additivity (<= 1e-9).
CheckResult check_oplus_algebra(std::uint64_t seed, int pairs = 10000);

/// Analytic backward vs central finite differences per parameter class on
/// random two-surfel rays, relative error <= 1e-4.
CheckResult check_gradients(std::uint64_t seed, int rays = 50);

/// Depth-swap sweep with and without per-ray color blending.
CheckResult check_continuity(int steps = 1000);

/// Spatial blending and k-NN tables vs all-pairs references, bitwise.
CheckResult check_spatial_blend(std::uint64_t seed, int clusters = 4);

/// All of the above with default sizes.
std::vector<CheckResult> run_verification(std::uint64_t seed = 1);

/// Structured-text report (JSON).
std::string verification_report(const std::vector<CheckResult>& results);

}  // namespace gfs
