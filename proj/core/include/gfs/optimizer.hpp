#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gfs/camera.hpp"
#include "gfs/colorprop.hpp"
#include "gfs/image.hpp"
#include "gfs/losses.hpp"
#include "gfs/renderer.hpp"
#include "gfs/shading.hpp"
#include "gfs/surfel.hpp"

namespace gfs {

struct View {
  Camera camera;
  Image image;  // RGB target in [0, 1]
};

struct Dataset {
  std::vector<View> views;
};

struct LearningRates {
  double center = 1.6e-4;       // world units, decayed to center * center_final_ratio
  double center_final_ratio = 0.01;
  double rotation = 1e-3;       // radians
  double log_scale = 5e-3;
  double log_weight = 5e-2;
  double color = 2.5e-3;        // SH coefficients
  double latent = 1e-3;
  double net = 1e-3;
};

struct FitConfig {
  int iterations = 5000;
  int batch = 1;
  LearningRates lr;
  int lr_decay_steps = 5000;    // exponential center decay horizon
  /// Center rates are multiplied by this; 0 derives it from the cameras
  /// (1.1 x the largest camera distance from their centroid).
  double spatial_lr_scale = 0.0;
  /// Iterations before the distortion and normal terms switch on.
  int distortion_from = 500;
  int normal_from = 1200;
  BlendConfig blend;
  LossConfig loss;
  CompositeMode mode = CompositeMode::kRefined;
  SortMode sorting = SortMode::kGlobal;
  FootprintConfig footprint;
  double cutoff = kDefaultCutoff;
  Rgb background = Rgb::Zero();
  std::uint64_t seed = 0;
  int workers = 0;
  int checkpoint_interval = 0;  // 0 disables periodic checkpoints
  std::string checkpoint_path;

  /// Throws ConfigError for non-positive rates or iteration counts, or
  /// per-ray blending (forward-only).
  void validate() const;
  RenderOptions render_options() const;
};

/// FNV-1a over every setting that changes the optimization trajectory
/// (iterations, workers and checkpoint settings excluded).
std::uint64_t config_hash(const FitConfig& cfg);

/// 1.1 x the largest distance of a camera center from the centroid.
double camera_extent(const Dataset& data);

/// Mixes `x` into a well-distributed 64-bit value.
std::uint64_t splitmix64(std::uint64_t x);

/// View index used at an iteration; a pure function of (seed, iteration).
std::size_t pick_view(std::uint64_t seed, std::uint64_t iteration, int slot, std::size_t views);

enum class InitStrategy { kRandom, kFromPoints };

/// Random strategy: centers uniform in [lo, hi], random frames, scales 2% of
/// the box diagonal, weight 0.5. From-points: one surfel per point (n is
/// ignored). Throws ConfigError for an empty box or point list.
SurfelSet init_surfels(const Vec3& lo, const Vec3& hi, std::size_t n, std::uint64_t seed,
                       ColorKind color, InitStrategy strategy = InitStrategy::kRandom,
                       std::span<const Vec3> points = {});

/// Adam moments over the flattened parameter vector.
struct OptimizerState {
  std::uint64_t step = 0;
  std::vector<double> m;
  std::vector<double> v;
};

struct Scene {
  SurfelSet surfels;
  std::optional<ShadingNet> net;
};

struct LossRecord {
  int iteration = 0;
  std::size_t view = 0;
  LossTerms terms;
};

struct Checkpoint {
  Scene scene;
  OptimizerState state;
  NeighborTable table;
  std::uint64_t config_hash = 0;
  int iteration = 0;  // completed iterations
};

/// Binary checkpoint: surfels (float64 columnar block), shading net,
/// optimizer moments, neighbor table, iteration and config hash.
void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

/// Number of optimizer parameters for a scene.
std::size_t parameter_count(const Scene& scene);

class Optimizer {
 public:
  Optimizer(FitConfig cfg, Checkpoint start);

  /// One iteration. Throws DomainError with a diagnostic on a non-finite
  /// loss or gradient.
  LossRecord step(const Dataset& data);

  /// Runs until cfg.iterations, writing periodic checkpoints when
  /// configured. `on_step` sees every loss record.
  void run(const Dataset& data, const std::function<void(const LossRecord&)>& on_step = {});

  const Checkpoint& checkpoint() const { return ck_; }
  const FitConfig& config() const { return cfg_; }

  /// Colors attributes as rendered (propagated when spatial blending is on).
  std::vector<ColorAttr> render_attrs();

 private:
  void refresh_table(bool force);
  void apply(const GradBuffers& g);

  FitConfig cfg_;
  Checkpoint ck_;
  double spatial_scale_ = 0.0;
};

/// Runs a fit from `init` (fresh state) and returns the final checkpoint.
Checkpoint fit(const Dataset& data, Scene init, const FitConfig& cfg,
               const std::function<void(const LossRecord&)>& on_step = {});

}  // namespace gfs
