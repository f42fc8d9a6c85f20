#include "gfs/renderer.hpp"

#include <algorithm>
#include <cmath>

#include "gfs/colorprop.hpp"
#include "gfs/errors.hpp"
#include "gfs/parallel.hpp"

namespace gfs {

namespace {

constexpr int kTile = 16;

void check_sorted(std::span<const IntersectionRecord> records) {
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i].t < records[i - 1].t) throw ContractViolation("composite: records not sorted by t");
  }
}

// Opacity and the survival factor 1 - alpha.
std::pair<double, double> alpha_of(double f, double rho, CompositeMode mode) {
  if (mode == CompositeMode::kClassic) {
    const double a = std::min(f, kClassicAlphaMax);
    return {a, 1.0 - a};
  }
  return {-std::expm1(-rho), std::exp(-rho)};
}

bool skipped(double alpha, const CompositeConfig& cfg) {
  return cfg.alpha_floor > 0.0 && alpha < cfg.alpha_floor;
}

bool exhausted(double transmittance, const CompositeConfig& cfg) {
  return cfg.early_exit > 0.0 && transmittance < cfg.early_exit;
}

CompositeResult composite_with(std::span<const IntersectionRecord> records,
                               std::span<const Rgb> colors, const CompositeConfig& cfg,
                               CompositeMode mode) {
  if (colors.size() != records.size()) throw ContractViolation("composite: one color per record");
  check_sorted(records);
  CompositeResult res;
  res.weights.assign(records.size(), 0.0);
  double T = 1.0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto [alpha, survive] = alpha_of(records[i].f, records[i].rho, mode);
    if (skipped(alpha, cfg)) continue;
    const double w = alpha * T;
    res.weights[i] = w;
    res.color += w * colors[i];
    res.depth_sum += w * records[i].t;
    res.weight_sum += w;
    T *= survive;
    if (exhausted(T, cfg)) break;
  }
  res.transmittance = T;
  res.color += T * cfg.background;
  res.depth_valid = res.weight_sum > kMinDepthWeight;
  res.depth = res.depth_valid ? res.depth_sum / res.weight_sum : 0.0;
  return res;
}

struct SurfelFootprint {
  double x0 = 0, x1 = -1, y0 = 0, y1 = -1;  // pixel-center bounds
  double view_z = 0;
  bool visible = false;
};

SurfelFootprint screen_bounds(const Camera& cam, const Surfel& s, double cutoff) {
  SurfelFootprint fp;
  const Vec3 du = cutoff * s.scale_u * s.tangent_u;
  const Vec3 dv = cutoff * s.scale_v * s.tangent_v;
  const Vec3 corners[4] = {s.center + du + dv, s.center + du - dv, s.center - du + dv,
                           s.center - du - dv};
  fp.view_z = cam.to_camera(s.center).z();
  int in_front = 0;
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const auto& c : corners) {
    const Vec3 p = cam.to_camera(c);
    if (p.z() <= cam.near_clip) continue;
    ++in_front;
    const double px = cam.fx * p.x() / p.z() + cam.cx;
    const double py = cam.fy * p.y() / p.z() + cam.cy;
    x0 = std::min(x0, px);
    x1 = std::max(x1, px);
    y0 = std::min(y0, py);
    y1 = std::max(y1, py);
  }
  if (in_front == 0) return fp;
  if (in_front < 4) {
    // Straddles the near plane: fall back to the whole image.
    x0 = -1e300;
    y0 = -1e300;
    x1 = 1e300;
    y1 = 1e300;
  }
  // Slack of one pixel guards the projected-quad bound against rounding.
  fp.x0 = x0 - 1.0;
  fp.x1 = x1 + 1.0;
  fp.y0 = y0 - 1.0;
  fp.y1 = y1 + 1.0;
  fp.visible = fp.x1 >= 0.0 && fp.y1 >= 0.0 && fp.x0 <= cam.width && fp.y0 <= cam.height;
  return fp;
}

struct WorkerOutput {
  std::vector<std::size_t> entry_count;  // per pixel in the block
  std::vector<PixelEntry> entries;
  std::vector<MemberHit> members;
  std::size_t mixed_color_runs = 0;
};

Vec3 facing(const Vec3& n, const Vec3& dir) { return n.dot(dir) > 0.0 ? Vec3(-n) : n; }

}  // namespace

CompositeResult composite_refined(std::span<const IntersectionRecord> records,
                                  std::span<const Rgb> colors, const CompositeConfig& cfg) {
  return composite_with(records, colors, cfg, CompositeMode::kRefined);
}

CompositeResult composite_classic(std::span<const IntersectionRecord> records,
                                  std::span<const Rgb> colors, const CompositeConfig& cfg) {
  return composite_with(records, colors, cfg, CompositeMode::kClassic);
}

CompositeResult composite(std::span<const IntersectionRecord> records,
                          std::span<const Rgb> colors, const CompositeConfig& cfg) {
  return composite_with(records, colors, cfg, cfg.mode);
}

RenderBuffers render(const Camera& camera, std::span<const Surfel> surfels,
                     std::span<const Rgb> colors, const RenderOptions& options) {
  camera.validate();
  if (colors.size() != surfels.size()) throw ContractViolation("render: one color per surfel");
  if (options.per_ray_blend_tau && options.sorting != SortMode::kPerRay) {
    throw ConfigError("render: per-ray color blending needs per-ray sorting");
  }
  const CompositeConfig& cc = options.composite;
  const int W = camera.width, H = camera.height;
  const int tiles_x = (W + kTile - 1) / kTile, tiles_y = (H + kTile - 1) / kTile;

  std::vector<SurfelFootprint> bounds(surfels.size());
  parallel_for(surfels.size(), options.workers, [&](std::size_t b, std::size_t e, int) {
    for (std::size_t i = b; i < e; ++i) bounds[i] = screen_bounds(camera, surfels[i], options.cutoff);
  });

  std::vector<std::vector<std::uint32_t>> tiles(std::size_t(tiles_x) * tiles_y);
  for (std::size_t i = 0; i < surfels.size(); ++i) {
    const auto& b = bounds[i];
    if (!b.visible) continue;
    // Pixel x covers center x + 0.5.
    const int px0 = std::max(0, int(std::ceil(std::max(b.x0, -1.0) - 0.5)));
    const int px1 = std::min(W - 1, int(std::floor(std::min(b.x1, double(W) + 1.0) - 0.5)));
    const int py0 = std::max(0, int(std::ceil(std::max(b.y0, -1.0) - 0.5)));
    const int py1 = std::min(H - 1, int(std::floor(std::min(b.y1, double(H) + 1.0) - 0.5)));
    if (px0 > px1 || py0 > py1) continue;
    for (int ty = py0 / kTile; ty <= py1 / kTile; ++ty) {
      for (int tx = px0 / kTile; tx <= px1 / kTile; ++tx) {
        tiles[std::size_t(ty) * tiles_x + tx].push_back(std::uint32_t(i));
      }
    }
  }
  if (options.sorting == SortMode::kGlobal) {
    for (auto& list : tiles) {
      std::sort(list.begin(), list.end(), [&](std::uint32_t a, std::uint32_t b) {
        return bounds[a].view_z < bounds[b].view_z || (bounds[a].view_z == bounds[b].view_z && a < b);
      });
    }
  }

  const double tie_tol = tie_tolerance(surfels);
  const bool merge = cc.mode == CompositeMode::kRefined && options.sorting == SortMode::kPerRay;

  RenderBuffers out;
  out.width = W;
  out.height = H;
  const std::size_t P = out.pixels();
  out.color.assign(3 * P, 0.0);
  out.depth.assign(P, 0.0);
  out.normal.assign(3 * P, 0.0);
  out.transmittance.assign(P, 1.0);
  out.weight_sum.assign(P, 0.0);
  out.depth_valid.assign(P, 0);

  int workers = options.workers > 0 ? options.workers : default_workers();
  workers = std::max(1, std::min(workers, H));
  std::vector<WorkerOutput> outputs(workers);

  parallel_for(std::size_t(H), workers, [&](std::size_t row_begin, std::size_t row_end, int w) {
    WorkerOutput& wo = outputs[w];
    wo.entry_count.assign((row_end - row_begin) * W, 0);
    std::vector<IntersectionRecord> hits;
    std::vector<Rgb> hit_colors;
    std::vector<double> hit_depths, hit_weights;

    for (std::size_t y = row_begin; y < row_end; ++y) {
      for (int x = 0; x < W; ++x) {
        const std::size_t p = y * W + x;
        const Ray ray = camera.pixel_ray(x, int(y));
        const auto& list = tiles[(y / kTile) * tiles_x + x / kTile];
        const double pcx = x + 0.5, pcy = y + 0.5;
        const std::size_t entries_before = wo.entries.size();

        double T = 1.0;
        Rgb C = Rgb::Zero();
        Vec3 N = Vec3::Zero();
        double depth_sum = 0.0, wsum = 0.0;

        auto emit = [&](const IntersectionRecord& rec, const Rgb& color,
                        std::span<const IntersectionRecord> members,
                        std::span<const Rgb> member_colors) {
          const auto [alpha, survive] = alpha_of(rec.f, rec.rho, cc.mode);
          if (skipped(alpha, cc)) return false;
          PixelEntry e;
          e.member_begin = std::uint32_t(wo.members.size());
          e.member_count = std::uint32_t(members.size());
          e.t = rec.t;
          e.rho = rec.rho;
          e.f = rec.f;
          e.alpha = alpha;
          e.transmittance_before = T;
          e.weight = alpha * T;
          e.color = color;
          e.normal = facing(surfels[members.front().surfel].normal(), ray.direction);
          for (std::size_t k = 0; k < members.size(); ++k) {
            wo.members.push_back(MemberHit{members[k].surfel, members[k].t, members[k].f,
                                           members[k].rho, member_colors[k]});
          }
          C += e.weight * color;
          N += e.weight * e.normal;
          depth_sum += e.weight * rec.t;
          wsum += e.weight;
          T *= survive;
          wo.entries.push_back(e);
          return exhausted(T, cc);
        };

        if (options.sorting == SortMode::kGlobal) {
          for (std::uint32_t idx : list) {
            const auto& b = bounds[idx];
            if (pcx < b.x0 || pcx > b.x1 || pcy < b.y0 || pcy > b.y1) continue;
            auto rec = intersect(ray, surfels[idx], camera.near_clip, options.cutoff, cc.footprint);
            if (!rec) continue;
            rec->surfel = idx;
            if (emit(*rec, colors[idx], {&*rec, 1}, {&colors[idx], 1})) break;
          }
        } else {
          hits.clear();
          for (std::uint32_t idx : list) {
            const auto& b = bounds[idx];
            if (pcx < b.x0 || pcx > b.x1 || pcy < b.y0 || pcy > b.y1) continue;
            auto rec = intersect(ray, surfels[idx], camera.near_clip, options.cutoff, cc.footprint);
            if (!rec) continue;
            rec->surfel = idx;
            hits.push_back(*rec);
          }
          std::sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) {
            return a.t < b.t || (a.t == b.t && a.surfel < b.surfel);
          });
          hit_colors.resize(hits.size());
          for (std::size_t i = 0; i < hits.size(); ++i) hit_colors[i] = colors[hits[i].surfel];
          if (options.per_ray_blend_tau && !hits.empty()) {
            hit_depths.resize(hits.size());
            hit_weights.resize(hits.size());
            for (std::size_t i = 0; i < hits.size(); ++i) {
              hit_depths[i] = hits[i].t;
              hit_weights[i] = surfels[hits[i].surfel].weight;
            }
            hit_colors = blend_per_ray(hit_depths, hit_weights, hit_colors, *options.per_ray_blend_tau);
          }
          if (merge) {
            const MergedRecords merged = merge_coincident(hits, hit_colors, cc.footprint, tie_tol);
            wo.mixed_color_runs += merged.mixed_color_runs;
            for (std::size_t m = 0; m < merged.records.size(); ++m) {
              const std::size_t first = merged.first_member[m];
              const std::size_t count = merged.records[m].members;
              if (emit(merged.records[m], merged.colors[m],
                       std::span<const IntersectionRecord>(hits).subspan(first, count),
                       std::span<const Rgb>(hit_colors).subspan(first, count))) {
                break;
              }
            }
          } else {
            for (std::size_t i = 0; i < hits.size(); ++i) {
              if (emit(hits[i], hit_colors[i], {&hits[i], 1}, {&hit_colors[i], 1})) break;
            }
          }
        }

        C += T * cc.background;
        for (int c = 0; c < 3; ++c) out.color[3 * p + c] = C[c];
        out.transmittance[p] = T;
        out.weight_sum[p] = wsum;
        if (wsum > kMinDepthWeight) {
          out.depth_valid[p] = 1;
          out.depth[p] = depth_sum / wsum;
        }
        if (N.norm() > 0.0) N.normalize();
        for (int c = 0; c < 3; ++c) out.normal[3 * p + c] = N[c];
        wo.entry_count[p - row_begin * W] = wo.entries.size() - entries_before;
      }
    }
  });

  if (options.keep_cache) {
    ForwardCache& cache = out.cache;
    cache.valid = true;
    cache.per_ray_blend = options.per_ray_blend_tau.has_value();
    cache.pixel_offset.assign(P + 1, 0);
    std::size_t total_entries = 0, total_members = 0;
    for (const auto& wo : outputs) {
      total_entries += wo.entries.size();
      total_members += wo.members.size();
    }
    cache.entries.reserve(total_entries);
    cache.members.reserve(total_members);
    std::size_t p = 0;
    for (const auto& wo : outputs) {
      const auto member_base = std::uint32_t(cache.members.size());
      for (std::size_t count : wo.entry_count) {
        cache.pixel_offset[p + 1] = cache.pixel_offset[p] + count;
        ++p;
      }
      for (PixelEntry e : wo.entries) {
        e.member_begin += member_base;
        cache.entries.push_back(e);
      }
      cache.members.insert(cache.members.end(), wo.members.begin(), wo.members.end());
    }
  }
  for (const auto& wo : outputs) out.mixed_color_runs += wo.mixed_color_runs;
  return out;
}

ShadedSurfels shade_surfels(const Camera& camera, std::span<const Surfel> surfels,
                            const ShadingNet* net, std::span<const ColorAttr> attrs) {
  if (!attrs.empty() && attrs.size() != surfels.size()) {
    throw ContractViolation("shade_surfels: one attribute per surfel");
  }
  ShadedSurfels out;
  out.colors.resize(surfels.size());
  out.caches.resize(surfels.size());
  parallel_for(surfels.size(), 0, [&](std::size_t b, std::size_t e, int) {
    for (std::size_t i = b; i < e; ++i) {
      const ColorAttr& attr = attrs.empty() ? surfels[i].color : attrs[i];
      out.colors[i] = eval_color(attr, surfels[i].center, camera.origin(), surfels[i].normal(), net,
                                 &out.caches[i]);
    }
  });
  return out;
}

RenderBuffers render(const Camera& camera, std::span<const Surfel> surfels, const ShadingNet* net,
                     const RenderOptions& options) {
  const ShadedSurfels shaded = shade_surfels(camera, surfels, net);
  return render(camera, surfels, shaded.colors, options);
}

namespace {
Image make_image(int w, int h, int channels, const std::vector<double>& data) {
  Image img(w, h, channels);
  img.data = data;
  return img;
}
}  // namespace

Image RenderBuffers::color_image() const { return make_image(width, height, 3, color); }
Image RenderBuffers::depth_image() const { return make_image(width, height, 1, depth); }
Image RenderBuffers::normal_image() const { return make_image(width, height, 3, normal); }
Image RenderBuffers::transmittance_image() const {
  return make_image(width, height, 1, transmittance);
}

}  // namespace gfs
