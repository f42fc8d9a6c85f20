#pragma once

// Brute-force references for the closed forms: the footprint as a numerical
// integral of an extruded density, and direct integration of the volume
// rendering equation along a ray.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gfs/geometry.hpp"
#include "gfs/mathkernel.hpp"
#include "gfs/surfel.hpp"

namespace gfs {

struct QuadratureConfig {
  double h = 1e-3;                 // extrusion half-width, world units
  int samples_per_kernel = 64;     // initial Simpson intervals per slab half
  std::vector<double> h_sequence = {1e-2, 1e-3, 1e-4};
  double tolerance = 1e-10;        // doubling stops when estimates differ by less
  int max_doublings = 20;
  double cutoff = kDefaultCutoff;
  double near_clip = 0.0;

  /// Throws ConfigError for h <= 0, fewer than 64 samples, or a sequence that
  /// is not strictly decreasing and positive.
  void validate() const;
};

/// A plane hit computed independently of the renderer.
struct OracleHit {
  double t = 0.0;
  double f = 0.0;          // clamped kernel value min(w G, f_max)
  double cos_theta = 0.0;  // |omega . n|
};

/// Ray-plane hit with the same kernel truncation as the renderer; nullopt
/// when the ray misses.
std::optional<OracleHit> oracle_hit(const Ray& ray, const Surfel& s, const QuadratureConfig& qc,
                                    const FootprintConfig& fp);

/// Density of the extruded kernel at depth t: the geometry field decays
/// linearly from f - c at the hit to -c at |t - t_hit| = h / cos(theta), and
/// sigma = psi(-F) / Psi(-F) * (f / h) * cos(theta). Zero outside the slab.
/// Throws DomainError for h <= 0.
double extruded_density(double t, const OracleHit& hit, double h, const FootprintConfig& fp);
double extruded_density(double t, const Ray& ray, const Surfel& s, double h,
                        const QuadratureConfig& qc, const FootprintConfig& fp);

struct QuadratureEstimate {
  double value = 0.0;
  double last_change = 0.0;  // |S_2n - S_n| at termination
  int intervals = 0;         // per slab half
  bool converged = false;
};

/// Composite Simpson over the slab, split at the kink, doubling until
/// successive estimates agree to qc.tolerance.
QuadratureEstimate footprint_by_quadrature(const OracleHit& hit, double h,
                                           const QuadratureConfig& qc, const FootprintConfig& fp);

/// Throws DomainError when the ray misses the surfel.
QuadratureEstimate footprint_by_quadrature(const Ray& ray, const Surfel& s, double h,
                                           const QuadratureConfig& qc, const FootprintConfig& fp);

/// Stopping rules shared with the compositor: slabs whose optical depth
/// gives opacity below `alpha_floor` are skipped, and integration stops once
/// transmittance falls below `early_exit`. Zero disables either rule.
struct OraclePolicy {
  double alpha_floor = 0.0;
  double early_exit = 0.0;
  Rgb background = Rgb::Zero();
};

struct QuadratureRender {
  Rgb color = Rgb::Zero();
  double depth = 0.0;         // normalized expected depth
  double weight_sum = 0.0;    // integral of T sigma
  double transmittance = 1.0;
  bool depth_valid = false;
  bool preconditions_ok = true;
  double h_used = 0.0;
  std::string diagnostic;
};

/// Slab layout check for a set of hits. Coincident hits (|dt| <= tie_tol)
/// form one slab; returns the largest h <= h_start (halving) for which the
/// slabs are disjoint, or nullopt if none above h_min exists.
std::optional<double> separating_half_width(std::span<const OracleHit> hits, double h_start,
                                            double tie_tol, double h_min = 1e-9);

/// Integrates T' = -sigma T, C' = sigma T c, D' = sigma T t along the ray with
/// RK4 and step doubling. Preconditions: slabs disjoint for some h (shrunk
/// from qc.h as needed), and coincident members share one color. Violations
/// are reported in the result, not rendered.
QuadratureRender render_by_quadrature(const Ray& ray, std::span<const Surfel> surfels,
                                      std::span<const Rgb> colors, const QuadratureConfig& qc,
                                      const FootprintConfig& fp, const OraclePolicy& policy = {});

}  // namespace gfs
