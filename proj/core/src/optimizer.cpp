#include "gfs/optimizer.hpp"

#include <cmath>
#include <cstring>
#include <random>
#include <sstream>

#include "gfs/errors.hpp"

namespace gfs {

namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-15;
constexpr double kMinScale = 1e-7;
constexpr std::size_t kSurfelBlock = 9;  // center, rotation, log scales, log weight

struct Fnv {
  std::uint64_t h = 1469598103934665603ull;
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= c[i];
      h *= 1099511628211ull;
    }
  }
  template <typename T>
  void add(const T& v) {
    bytes(&v, sizeof(T));
  }
};

}  // namespace

void FitConfig::validate() const {
  if (iterations < 0) throw ConfigError("fit: iterations must be non-negative");
  if (batch < 1) throw ConfigError("fit: batch must be at least 1");
  const double rates[] = {lr.center, lr.rotation, lr.log_scale, lr.log_weight,
                          lr.color,  lr.latent,   lr.net};
  for (double r : rates) {
    if (!(r >= 0.0) || !std::isfinite(r)) throw ConfigError("fit: learning rates must be >= 0");
  }
  if (!(lr.center_final_ratio > 0.0)) throw ConfigError("fit: center_final_ratio must be > 0");
  if (!(spatial_lr_scale >= 0.0)) throw ConfigError("fit: spatial_lr_scale must be >= 0");
  if (distortion_from < 0 || normal_from < 0) {
    throw ConfigError("fit: loss schedule iterations must be >= 0");
  }
  if (lr_decay_steps < 1) throw ConfigError("fit: lr_decay_steps must be at least 1");
  if (blend.mode == BlendMode::kPerRay) {
    throw ConfigError("fit: per-ray color blending is forward-only; use spatial or off");
  }
  blend.validate();
  loss.validate();
  footprint.validate();
  if (!(cutoff > 0.0)) throw ConfigError("fit: cutoff must be positive");
  if (checkpoint_interval < 0) throw ConfigError("fit: checkpoint_interval must be >= 0");
  if (checkpoint_interval > 0 && checkpoint_path.empty()) {
    throw ConfigError("fit: periodic checkpoints need a checkpoint path");
  }
}

RenderOptions FitConfig::render_options() const {
  RenderOptions o;
  o.composite.footprint = footprint;
  o.composite.mode = mode;
  o.composite.background = background;
  o.sorting = sorting;
  o.cutoff = cutoff;
  o.keep_cache = true;
  o.workers = workers;
  return o;
}

std::uint64_t config_hash(const FitConfig& c) {
  Fnv f;
  f.add(c.batch);
  f.add(c.lr.center);
  f.add(c.lr.center_final_ratio);
  f.add(c.lr.rotation);
  f.add(c.lr.log_scale);
  f.add(c.lr.log_weight);
  f.add(c.lr.color);
  f.add(c.lr.latent);
  f.add(c.lr.net);
  f.add(c.lr_decay_steps);
  f.add(c.spatial_lr_scale);
  f.add(c.distortion_from);
  f.add(c.normal_from);
  f.add(c.blend.tau);
  f.add(c.blend.k);
  f.add(c.blend.refresh_interval);
  f.add(int(c.blend.mode));
  f.add(c.loss.lambda1);
  f.add(c.loss.lambda2);
  f.add(c.loss.rgb_mix);
  f.add(int(c.mode));
  f.add(int(c.sorting));
  f.add(c.footprint.c);
  f.add(c.footprint.f_max);
  f.add(c.footprint.fast_path);
  f.add(c.footprint.normalize_s0);
  f.add(c.cutoff);
  f.add(c.background[0]);
  f.add(c.background[1]);
  f.add(c.background[2]);
  f.add(c.seed);
  return f.h;
}

double camera_extent(const Dataset& data) {
  if (data.views.empty()) return 1.0;
  Vec3 mean = Vec3::Zero();
  for (const View& v : data.views) mean += v.camera.origin();
  mean /= double(data.views.size());
  double r = 0.0;
  for (const View& v : data.views) r = std::max(r, (v.camera.origin() - mean).norm());
  return 1.1 * (r > 0.0 ? r : 1.0);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::size_t pick_view(std::uint64_t seed, std::uint64_t iteration, int slot, std::size_t views) {
  if (views == 0) throw ContractViolation("pick_view: empty dataset");
  return std::size_t(splitmix64(seed ^ splitmix64(iteration * 64 + std::uint64_t(slot))) % views);
}

SurfelSet init_surfels(const Vec3& lo, const Vec3& hi, std::size_t n, std::uint64_t seed,
                       ColorKind color, InitStrategy strategy, std::span<const Vec3> points) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto random_frame = [&](Surfel& s) {
    const Eigen::Quaterniond q(normal(rng), normal(rng), normal(rng), normal(rng));
    const Mat3 R = q.normalized().toRotationMatrix();
    s.tangent_u = R.col(0);
    s.tangent_v = R.col(1);
  };
  SurfelSet out;
  if (strategy == InitStrategy::kFromPoints) {
    if (points.empty()) throw ConfigError("init_surfels: empty point list");
    Vec3 plo = points.front(), phi = points.front();
    for (const auto& p : points) {
      plo = plo.cwiseMin(p);
      phi = phi.cwiseMax(p);
    }
    const double diag = std::max((phi - plo).norm(), 1e-6);
    for (std::size_t i = 0; i < points.size(); ++i) {
      Surfel s;
      s.center = points[i];
      random_frame(s);
      s.scale_u = s.scale_v = 0.02 * diag;
      s.weight = 0.5;
      s.color = make_attr(color);
      s.id = std::uint32_t(i);
      out.push_back(s);
    }
    return out;
  }
  if (n == 0) throw ConfigError("init_surfels: n must be at least 1");
  const Vec3 ext = hi - lo;
  if (!(ext.minCoeff() > 0.0)) throw ConfigError("init_surfels: empty bounds");
  const double diag = ext.norm();
  for (std::size_t i = 0; i < n; ++i) {
    Surfel s;
    s.center = lo + Vec3(unit(rng) * ext.x(), unit(rng) * ext.y(), unit(rng) * ext.z());
    random_frame(s);
    s.scale_u = s.scale_v = 0.02 * diag;
    s.weight = 0.5;
    s.color = make_attr(color);
    s.id = std::uint32_t(i);
    out.push_back(s);
  }
  return out;
}

std::size_t parameter_count(const Scene& scene) {
  if (scene.surfels.empty()) return scene.net ? scene.net->parameter_count() : 0;
  const std::size_t dim = attr_dim(kind_of(scene.surfels.front().color));
  return scene.surfels.size() * (kSurfelBlock + dim) +
         (scene.net ? scene.net->parameter_count() : 0);
}

Optimizer::Optimizer(FitConfig cfg, Checkpoint start) : cfg_(std::move(cfg)), ck_(std::move(start)) {
  cfg_.validate();
  const std::uint64_t hash = config_hash(cfg_);
  const std::size_t n = parameter_count(ck_.scene);
  if (ck_.state.step == 0 && ck_.state.m.empty()) {
    ck_.state.m.assign(n, 0.0);
    ck_.state.v.assign(n, 0.0);
    ck_.config_hash = hash;
  } else if (ck_.config_hash != hash) {
    throw ConfigError("fit: checkpoint was written with a different configuration");
  }
  if (ck_.state.m.size() != n || ck_.state.v.size() != n) {
    throw ContractViolation("fit: optimizer moments do not match the scene");
  }
  if (!ck_.scene.surfels.empty()) {
    const ColorKind kind = kind_of(ck_.scene.surfels.front().color);
    for (const auto& s : ck_.scene.surfels) {
      validate_surfel(s);
      if (kind_of(s.color) != kind) throw ConfigError("fit: mixed color representations");
    }
    if (kind == ColorKind::kLatent && !ck_.scene.net) {
      throw ConfigError("fit: latent colors need a shading net");
    }
  }
}

void Optimizer::refresh_table(bool force) {
  if (cfg_.blend.mode != BlendMode::kSpatial || ck_.scene.surfels.empty()) return;
  const bool stale = ck_.table.size() != ck_.scene.surfels.size();
  if (!force && !stale && ck_.iteration % cfg_.blend.refresh_interval != 0) return;
  std::vector<Vec3> centers;
  centers.reserve(ck_.scene.surfels.size());
  for (const auto& s : ck_.scene.surfels) centers.push_back(s.center);
  ck_.table = knn(centers, cfg_.blend.k);
}

std::vector<ColorAttr> Optimizer::render_attrs() {
  if (cfg_.blend.mode != BlendMode::kSpatial || ck_.scene.surfels.empty()) return {};
  refresh_table(false);
  return blend_spatial(ck_.scene.surfels, ck_.table, cfg_.blend.tau);
}

LossRecord Optimizer::step(const Dataset& data) {
  if (data.views.empty()) throw ConfigError("fit: dataset has no views");
  Scene& scene = ck_.scene;
  const ShadingNet* net = scene.net ? &*scene.net : nullptr;
  const std::size_t n = scene.surfels.size();
  const int dim = n ? attr_dim(kind_of(scene.surfels.front().color)) : 0;
  const RenderOptions opts = cfg_.render_options();

  const std::vector<ColorAttr> attrs = render_attrs();
  LossConfig loss = cfg_.loss;
  if (ck_.iteration < cfg_.distortion_from) loss.lambda1 = 0.0;
  if (ck_.iteration < cfg_.normal_from) loss.lambda2 = 0.0;
  if (spatial_scale_ <= 0.0) {
    spatial_scale_ = cfg_.spatial_lr_scale > 0.0 ? cfg_.spatial_lr_scale : camera_extent(data);
  }
  GradBuffers total;
  total.resize(n, dim, net ? net->parameter_count() : 0);
  LossRecord rec;
  rec.iteration = ck_.iteration;
  for (int b = 0; b < cfg_.batch; ++b) {
    const std::size_t vi = pick_view(cfg_.seed, std::uint64_t(ck_.iteration), b, data.views.size());
    if (b == 0) rec.view = vi;
    const View& view = data.views[vi];
    const ShadedSurfels shaded = shade_surfels(view.camera, scene.surfels, net, attrs);
    const RenderBuffers buf = render(view.camera, scene.surfels, shaded.colors, opts);
    PixelGradients up;
    const LossTerms terms = total_loss(buf, view.camera, view.image, loss, &up);
    if (!std::isfinite(terms.total)) {
      std::ostringstream msg;
      msg << "fit: non-finite loss at iteration " << ck_.iteration << " view " << vi
          << " (rgb " << terms.rgb << ", distortion " << terms.distortion << ", normal "
          << terms.normal << ")";
      throw DomainError(msg.str());
    }
    GradBuffers g = backward(view.camera, scene.surfels, buf, up, opts);
    g.attr_dim = dim;
    g.attr.assign(n * std::size_t(dim), 0.0);
    g.net.assign(net ? net->parameter_count() : 0, 0.0);
    backward_shading(scene.surfels, shaded, net, attrs, g);
    if (!attrs.empty()) {
      g.attr = blend_spatial_backward(scene.surfels, ck_.table, cfg_.blend.tau, g.attr, dim);
    }
    total += g;
    rec.terms.rgb += terms.rgb / cfg_.batch;
    rec.terms.distortion += terms.distortion / cfg_.batch;
    rec.terms.normal += terms.normal / cfg_.batch;
    rec.terms.total += terms.total / cfg_.batch;
  }
  if (cfg_.batch > 1) {
    const double inv = 1.0 / cfg_.batch;
    for (std::size_t i = 0; i < n; ++i) {
      total.center[i] *= inv;
      total.rotation[i] *= inv;
      total.scale_u[i] *= inv;
      total.scale_v[i] *= inv;
      total.weight[i] *= inv;
    }
    for (auto& x : total.attr) x *= inv;
    for (auto& x : total.net) x *= inv;
  }
  if (!total.all_finite()) {
    std::ostringstream msg;
    msg << "fit: non-finite gradient at iteration " << ck_.iteration;
    throw DomainError(msg.str());
  }
  apply(total);
  ++ck_.iteration;
  if (cfg_.checkpoint_interval > 0 && ck_.iteration % cfg_.checkpoint_interval == 0) {
    save_checkpoint(cfg_.checkpoint_path, ck_);
  }
  return rec;
}

void Optimizer::apply(const GradBuffers& g) {
  OptimizerState& st = ck_.state;
  ++st.step;
  const double bc1 = 1.0 - std::pow(kBeta1, double(st.step));
  const double bc2 = 1.0 - std::pow(kBeta2, double(st.step));
  // Returns the Adam step (to be scaled by the learning rate) for slot i.
  auto adam = [&](std::size_t i, double grad) {
    st.m[i] = kBeta1 * st.m[i] + (1.0 - kBeta1) * grad;
    st.v[i] = kBeta2 * st.v[i] + (1.0 - kBeta2) * grad * grad;
    return (st.m[i] / bc1) / (std::sqrt(st.v[i] / bc2) + kAdamEps);
  };

  SurfelSet& surfels = ck_.scene.surfels;
  const std::size_t n = surfels.size();
  const int dim = g.attr_dim;
  const std::size_t stride = kSurfelBlock + std::size_t(dim);
  const double decay = std::pow(cfg_.lr.center_final_ratio,
                                std::min(1.0, double(ck_.iteration) / cfg_.lr_decay_steps));
  const double lr_center = cfg_.lr.center * spatial_scale_ * decay;
  const bool latent = n > 0 && kind_of(surfels.front().color) == ColorKind::kLatent;
  const double lr_attr = latent ? cfg_.lr.latent : cfg_.lr.color;

  for (std::size_t i = 0; i < n; ++i) {
    Surfel& s = surfels[i];
    const std::size_t o = i * stride;
    for (int a = 0; a < 3; ++a) s.center[a] -= lr_center * adam(o + a, g.center[i][a]);
    Vec3 delta;
    for (int a = 0; a < 3; ++a) delta[a] = -cfg_.lr.rotation * adam(o + 3 + a, g.rotation[i][a]);
    if (delta.squaredNorm() > 0.0) {
      const Mat3 R = rotation_from_axis_angle(delta);
      s.tangent_u = R * s.tangent_u;
      s.tangent_v = R * s.tangent_v;
      orthonormalize_frame(s);
    }
    // Log-space parameters: d L / d log x = x d L / d x.
    s.scale_u = std::max(kMinScale, s.scale_u * std::exp(-cfg_.lr.log_scale *
                                                          adam(o + 6, g.scale_u[i] * s.scale_u)));
    s.scale_v = std::max(kMinScale, s.scale_v * std::exp(-cfg_.lr.log_scale *
                                                          adam(o + 7, g.scale_v[i] * s.scale_v)));
    s.weight *= std::exp(-cfg_.lr.log_weight * adam(o + 8, g.weight[i] * s.weight));
    auto values = attr_values(s.color);
    for (int k = 0; k < dim; ++k) {
      values[k] -= lr_attr * adam(o + kSurfelBlock + k, g.attr[i * dim + k]);
    }
  }
  if (ck_.scene.net) {
    auto params = ck_.scene.net->parameters();
    const std::size_t base = n * stride;
    for (std::size_t k = 0; k < params.size(); ++k) {
      params[k] -= cfg_.lr.net * adam(base + k, g.net[k]);
    }
  }
}

void Optimizer::run(const Dataset& data, const std::function<void(const LossRecord&)>& on_step) {
  while (ck_.iteration < cfg_.iterations) {
    const LossRecord rec = step(data);
    if (on_step) on_step(rec);
  }
}

Checkpoint fit(const Dataset& data, Scene init, const FitConfig& cfg,
               const std::function<void(const LossRecord&)>& on_step) {
  Checkpoint start;
  start.scene = std::move(init);
  Optimizer opt(cfg, std::move(start));
  opt.run(data, on_step);
  return opt.checkpoint();
}

}  // namespace gfs
