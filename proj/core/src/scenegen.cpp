#include "gfs/scenegen.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gfs/errors.hpp"
#include "gfs/parallel.hpp"
#include "gfs/renderer.hpp"

namespace gfs {

namespace {

using json = nlohmann::json;
constexpr double kPi = std::numbers::pi;

// Axis-aligned rectangle {x : x[axis] = level, |x[a] - c[a]| <= h[a]}.
struct Rect {
  int axis;
  double level;
  Vec2 lo, hi;  // bounds on the two other axes, in axis order

  std::pair<int, int> others() const { return {(axis + 1) % 3, (axis + 2) % 3}; }

  std::optional<double> hit(const Ray& r) const {
    const double d = r.direction[axis];
    if (std::abs(d) < 1e-15) return std::nullopt;
    const double t = (level - r.origin[axis]) / d;
    if (!(t > 0.0)) return std::nullopt;
    const Vec3 p = r.at(t);
    const auto [a, b] = others();
    if (p[a] < lo[0] || p[a] > hi[0] || p[b] < lo[1] || p[b] > hi[1]) return std::nullopt;
    return t;
  }

  double distance(const Vec3& p) const {
    const auto [a, b] = others();
    const double da = std::max({lo[0] - p[a], 0.0, p[a] - hi[0]});
    const double db = std::max({lo[1] - p[b], 0.0, p[b] - hi[1]});
    const double dn = p[axis] - level;
    return std::sqrt(da * da + db * db + dn * dn);
  }

  double area() const { return (hi[0] - lo[0]) * (hi[1] - lo[1]); }

  Vec3 point(double s, double t) const {
    const auto [a, b] = others();
    Vec3 p;
    p[axis] = level;
    p[a] = lo[0] + s * (hi[0] - lo[0]);
    p[b] = lo[1] + t * (hi[1] - lo[1]);
    return p;
  }
};

std::vector<Rect> step_rects(const ShapeDesc& s) {
  const Vec3& c = s.center;
  const double hx = s.half_extent.x(), hy = s.half_extent.y();
  // Axis 2 rectangles bound (x, y); the axis 0 riser bounds (y, z).
  return {
      Rect{2, c.z(), Vec2(c.x() - hx, c.y() - hy), Vec2(c.x(), c.y() + hy)},
      Rect{2, c.z() + s.height, Vec2(c.x(), c.y() - hy), Vec2(c.x() + hx, c.y() + hy)},
      Rect{0, c.x(), Vec2(c.y() - hy, c.z()), Vec2(c.y() + hy, c.z() + s.height)},
  };
}

std::vector<Rect> box_rects(const ShapeDesc& s) {
  std::vector<Rect> out;
  const Vec3 lo = s.center - s.half_extent, hi = s.center + s.half_extent;
  for (int axis = 0; axis < 3; ++axis) {
    const int a = (axis + 1) % 3, b = (axis + 2) % 3;
    for (double level : {lo[axis], hi[axis]}) {
      out.push_back(Rect{axis, level, Vec2(lo[a], lo[b]), Vec2(hi[a], hi[b])});
    }
  }
  return out;
}

Vec3 facing(Vec3 n, const Vec3& d) { return n.dot(d) > 0.0 ? Vec3(-n) : n; }

std::string kind_name(ShapeKind k) {
  switch (k) {
    case ShapeKind::kSphere: return "sphere";
    case ShapeKind::kBox: return "box";
    case ShapeKind::kStep: return "step";
    case ShapeKind::kDisk: return "disk";
  }
  return "sphere";
}

ShapeKind kind_from(const std::string& s) {
  if (s == "sphere") return ShapeKind::kSphere;
  if (s == "box") return ShapeKind::kBox;
  if (s == "step") return ShapeKind::kStep;
  if (s == "disk") return ShapeKind::kDisk;
  throw ConfigError("scene: unknown shape '" + s + "'");
}

std::string model_name(ColorModel m) {
  switch (m) {
    case ColorModel::kConstant: return "constant";
    case ColorModel::kShSky: return "sh_sky";
    case ColorModel::kSpecularProbe: return "specular_probe";
  }
  return "constant";
}

ColorModel model_from(const std::string& s) {
  if (s == "constant") return ColorModel::kConstant;
  if (s == "sh_sky") return ColorModel::kShSky;
  if (s == "specular_probe") return ColorModel::kSpecularProbe;
  throw ConfigError("scene: unknown color model '" + s + "'");
}

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }
Vec3 json_vec(const json& j) { return Vec3(j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()); }

}  // namespace

void ShapeDesc::validate() const {
  if (!center.allFinite()) throw ConfigError("shape: non-finite center");
  switch (kind) {
    case ShapeKind::kSphere:
      if (!(radius > 0.0)) throw ConfigError("shape: sphere radius must be positive");
      break;
    case ShapeKind::kDisk:
      if (!(radius > 0.0)) throw ConfigError("shape: disk radius must be positive");
      if (!(normal.norm() > 0.0)) throw ConfigError("shape: disk normal must be non-zero");
      break;
    case ShapeKind::kBox:
      if (!(half_extent.minCoeff() > 0.0)) throw ConfigError("shape: box extents must be positive");
      break;
    case ShapeKind::kStep:
      if (!(half_extent.x() > 0.0 && half_extent.y() > 0.0)) {
        throw ConfigError("shape: step extents must be positive");
      }
      if (!(height > 0.0)) throw ConfigError("shape: step height must be positive");
      break;
  }
}

std::optional<ShapeDesc::Hit> ShapeDesc::intersect(const Ray& ray) const {
  switch (kind) {
    case ShapeKind::kSphere: {
      const Vec3 oc = ray.origin - center;
      const double b = oc.dot(ray.direction);
      const double c = oc.squaredNorm() - radius * radius;
      const double disc = b * b - c;
      if (disc < 0.0) return std::nullopt;
      const double sq = std::sqrt(disc);
      double t = -b - sq;
      if (!(t > 0.0)) t = -b + sq;
      if (!(t > 0.0)) return std::nullopt;
      return Hit{t, facing((ray.at(t) - center) / radius, ray.direction)};
    }
    case ShapeKind::kDisk: {
      const Vec3 n = normal.normalized();
      const double dn = ray.direction.dot(n);
      if (std::abs(dn) < 1e-15) return std::nullopt;
      const double t = (center - ray.origin).dot(n) / dn;
      if (!(t > 0.0) || (ray.at(t) - center).norm() > radius) return std::nullopt;
      return Hit{t, facing(n, ray.direction)};
    }
    case ShapeKind::kBox:
    case ShapeKind::kStep: {
      const auto rects = kind == ShapeKind::kBox ? box_rects(*this) : step_rects(*this);
      std::optional<Hit> best;
      for (const auto& r : rects) {
        if (auto t = r.hit(ray); t && (!best || *t < best->t)) {
          Vec3 n = Vec3::Zero();
          n[r.axis] = 1.0;
          best = Hit{*t, facing(n, ray.direction)};
        }
      }
      return best;
    }
  }
  return std::nullopt;
}

double ShapeDesc::distance(const Vec3& p) const {
  switch (kind) {
    case ShapeKind::kSphere:
      return std::abs((p - center).norm() - radius);
    case ShapeKind::kDisk: {
      const Vec3 n = normal.normalized();
      const Vec3 d = p - center;
      const double h = d.dot(n);
      const double r = (d - h * n).norm();
      const double out = std::max(0.0, r - radius);
      return std::sqrt(h * h + out * out);
    }
    case ShapeKind::kBox:
    case ShapeKind::kStep: {
      const auto rects = kind == ShapeKind::kBox ? box_rects(*this) : step_rects(*this);
      double best = 1e300;
      for (const auto& r : rects) best = std::min(best, r.distance(p));
      return best;
    }
  }
  return 0.0;
}

double ShapeDesc::area() const {
  switch (kind) {
    case ShapeKind::kSphere: return 4.0 * kPi * radius * radius;
    case ShapeKind::kDisk: return kPi * radius * radius;
    case ShapeKind::kBox:
    case ShapeKind::kStep: {
      double a = 0.0;
      for (const auto& r : kind == ShapeKind::kBox ? box_rects(*this) : step_rects(*this)) a += r.area();
      return a;
    }
  }
  return 0.0;
}

std::vector<Vec3> ShapeDesc::sample(std::size_t count, std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Vec3> out;
  out.reserve(count);
  switch (kind) {
    case ShapeKind::kSphere:
      for (std::size_t i = 0; i < count; ++i) {
        const double z = 2.0 * unit(rng) - 1.0, phi = 2.0 * kPi * unit(rng);
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        out.push_back(center + radius * Vec3(r * std::cos(phi), r * std::sin(phi), z));
      }
      break;
    case ShapeKind::kDisk: {
      const Vec3 n = normal.normalized();
      const Vec3 a = any_orthogonal(n), b = n.cross(a);
      for (std::size_t i = 0; i < count; ++i) {
        const double r = radius * std::sqrt(unit(rng)), phi = 2.0 * kPi * unit(rng);
        out.push_back(center + r * std::cos(phi) * a + r * std::sin(phi) * b);
      }
      break;
    }
    case ShapeKind::kBox:
    case ShapeKind::kStep: {
      const auto rects = kind == ShapeKind::kBox ? box_rects(*this) : step_rects(*this);
      std::vector<double> cumulative;
      double total = 0.0;
      for (const auto& r : rects) cumulative.push_back(total += r.area());
      for (std::size_t i = 0; i < count; ++i) {
        const double pick = unit(rng) * total;
        std::size_t k = 0;
        while (k + 1 < rects.size() && cumulative[k] < pick) ++k;
        const double s = unit(rng), t = unit(rng);
        out.push_back(rects[k].point(s, t));
      }
      break;
    }
  }
  return out;
}

std::pair<Vec3, Vec3> ShapeDesc::bounds() const {
  switch (kind) {
    case ShapeKind::kSphere:
      return {center - radius * Vec3::Ones(), center + radius * Vec3::Ones()};
    case ShapeKind::kDisk:
      return {center - radius * Vec3::Ones(), center + radius * Vec3::Ones()};
    case ShapeKind::kBox:
      return {center - half_extent, center + half_extent};
    case ShapeKind::kStep:
      return {center - Vec3(half_extent.x(), half_extent.y(), 0.0),
              center + Vec3(half_extent.x(), half_extent.y(), height)};
  }
  return {center, center};
}

Rgb ColorSpec::shade(const Vec3& n, const Vec3& d) const {
  const Vec3 l = light.normalized();
  Rgb c;
  switch (model) {
    case ColorModel::kConstant:
      c = albedo;
      break;
    case ColorModel::kShSky: {
      // Low-order sky irradiance: brighter from above, tinted by facing.
      const Rgb sky(0.55 + 0.25 * n.z(), 0.55 + 0.15 * n.z() + 0.1 * n.x(), 0.6 + 0.2 * n.y());
      c = albedo.cwiseProduct(sky) * 1.3;
      break;
    }
    case ColorModel::kSpecularProbe: {
      const double diffuse = std::max(0.0, n.dot(l));
      const Vec3 r = d - 2.0 * d.dot(n) * n;  // mirror direction
      const double spec = std::pow(std::max(0.0, r.dot(l)), shininess);
      c = albedo * (ambient + (1.0 - ambient) * diffuse) + specular * Rgb::Ones() * spec;
      break;
    }
  }
  return c.cwiseMax(0.0).cwiseMin(1.0);
}

void SceneSpec::validate() const {
  shape.validate();
  if (ring.count < 1) throw ConfigError("scene: ring needs at least one camera");
  if (!(ring.radius > 0.0)) throw ConfigError("scene: ring radius must be positive");
  if (ring.width < 1 || ring.height < 1) throw ConfigError("scene: image size must be positive");
  if (!(ring.fov_y_deg > 0.0 && ring.fov_y_deg < 180.0)) throw ConfigError("scene: bad field of view");
  if (supersample < 1) throw ConfigError("scene: supersample must be at least 1");
  if (surfel_cover && shape.kind != ShapeKind::kSphere && shape.kind != ShapeKind::kDisk) {
    throw ConfigError("scene: surfel covers exist for spheres and disks only");
  }
}

std::vector<Camera> make_ring(const RingSpec& ring) {
  std::vector<Camera> cams;
  for (int i = 0; i < ring.count; ++i) {
    const double az = 2.0 * kPi * i / ring.count;
    double el = ring.elevation_deg * kPi / 180.0;
    if (ring.alternate_elevation && i % 2 == 1) el = -el;
    const Vec3 eye = ring.target + ring.radius * Vec3(std::cos(el) * std::cos(az),
                                                      std::cos(el) * std::sin(az), std::sin(el));
    cams.push_back(Camera::look_at(eye, ring.target, Vec3::UnitZ(), ring.width, ring.height,
                                   ring.fov_y_deg, ring.near_clip));
  }
  return cams;
}

SurfelSet surfel_cover(const ShapeDesc& shape, std::size_t count, const Rgb& color,
                       std::uint64_t seed) {
  shape.validate();
  if (count == 0) throw ConfigError("surfel_cover: count must be positive");
  SurfelSet out;
  const double spacing = std::sqrt(shape.area() / double(count));
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(0.0, 2.0 * kPi);
  for (std::size_t i = 0; i < count; ++i) {
    Surfel s;
    Vec3 n;
    if (shape.kind == ShapeKind::kSphere) {
      // Fibonacci lattice.
      const double z = 1.0 - 2.0 * (i + 0.5) / double(count);
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double phi = golden * double(i);
      n = Vec3(r * std::cos(phi), r * std::sin(phi), z);
      s.center = shape.center + shape.radius * n;
    } else if (shape.kind == ShapeKind::kDisk) {
      n = shape.normal.normalized();
      const Vec3 a = any_orthogonal(n), b = n.cross(a);
      const double r = shape.radius * std::sqrt((i + 0.5) / double(count));
      const double phi = golden * double(i);
      s.center = shape.center + r * (std::cos(phi) * a + std::sin(phi) * b);
    } else {
      throw ConfigError("surfel_cover: unsupported shape");
    }
    const Vec3 a = any_orthogonal(n);
    const double spin = jitter(rng);
    s.tangent_u = std::cos(spin) * a + std::sin(spin) * n.cross(a);
    s.tangent_v = n.cross(s.tangent_u);
    s.scale_u = s.scale_v = 0.6 * spacing;
    s.weight = 4.0;
    s.color = ShColor::from_rgb(color);
    s.id = std::uint32_t(i);
    out.push_back(s);
  }
  return out;
}

Image render_analytic(const SceneSpec& spec, const Camera& camera) {
  Image img(camera.width, camera.height, 3);
  const int ss = spec.supersample;
  for (int y = 0; y < camera.height; ++y) {
    for (int x = 0; x < camera.width; ++x) {
      Rgb acc = Rgb::Zero();
      for (int sy = 0; sy < ss; ++sy) {
        for (int sx = 0; sx < ss; ++sx) {
          const Vec3 d = camera.direction_at(x + (sx + 0.5) / ss, y + (sy + 0.5) / ss);
          const Ray ray{camera.origin(), d};
          if (auto hit = spec.shape.intersect(ray); hit && hit->t > camera.near_clip) {
            acc += spec.color.shade(hit->normal, d);
          }
        }
      }
      acc /= double(ss * ss);
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = acc[c];
    }
  }
  quantize_8bit(img);
  return img;
}

SyntheticScene make_scene(const SceneSpec& spec) {
  spec.validate();
  SyntheticScene scene;
  scene.spec = spec;
  const auto cams = make_ring(spec.ring);
  scene.data.views.resize(cams.size());
  SurfelSet cover;
  std::vector<Rgb> cover_colors;
  if (spec.surfel_cover) {
    cover = surfel_cover(spec.shape, spec.cover_count, spec.color.albedo, spec.seed);
    cover_colors.assign(cover.size(), spec.color.albedo);
  }
  for (std::size_t i = 0; i < cams.size(); ++i) {
    View& v = scene.data.views[i];
    v.camera = cams[i];
    if (spec.surfel_cover) {
      RenderOptions opts;
      opts.keep_cache = false;
      const auto buf = render(cams[i], cover, cover_colors, opts);
      v.image = buf.color_image();
      quantize_8bit(v.image);
    } else {
      v.image = render_analytic(spec, cams[i]);
    }
  }
  return scene;
}

std::string scene_spec_to_json(const SceneSpec& s) {
  json j;
  j["format"] = "gfs-scene";
  j["version"] = 1;
  j["shape"] = {{"kind", kind_name(s.shape.kind)},
                {"center", vec_json(s.shape.center)},
                {"radius", s.shape.radius},
                {"half_extent", vec_json(s.shape.half_extent)},
                {"normal", vec_json(s.shape.normal)},
                {"height", s.shape.height}};
  j["color"] = {{"model", model_name(s.color.model)},
                {"albedo", vec_json(s.color.albedo)},
                {"light", vec_json(s.color.light)},
                {"ambient", s.color.ambient},
                {"specular", s.color.specular},
                {"shininess", s.color.shininess}};
  j["ring"] = {{"count", s.ring.count},
               {"radius", s.ring.radius},
               {"elevation_deg", s.ring.elevation_deg},
               {"alternate_elevation", s.ring.alternate_elevation},
               {"width", s.ring.width},
               {"height", s.ring.height},
               {"fov_y_deg", s.ring.fov_y_deg},
               {"near_clip", s.ring.near_clip},
               {"target", vec_json(s.ring.target)}};
  j["supersample"] = s.supersample;
  j["surfel_cover"] = s.surfel_cover;
  j["cover_count"] = s.cover_count;
  j["seed"] = s.seed;
  return j.dump(2);
}

SceneSpec scene_spec_from_json(const std::string& text) {
  SceneSpec s;
  try {
    const json j = json::parse(text);
    if (j.contains("version") && j["version"].get<int>() != 1) {
      throw ConfigError("scene: unsupported descriptor version");
    }
    if (j.contains("shape")) {
      const auto& sh = j["shape"];
      if (sh.contains("kind")) s.shape.kind = kind_from(sh["kind"].get<std::string>());
      if (sh.contains("center")) s.shape.center = json_vec(sh["center"]);
      if (sh.contains("radius")) s.shape.radius = sh["radius"].get<double>();
      if (sh.contains("half_extent")) s.shape.half_extent = json_vec(sh["half_extent"]);
      if (sh.contains("normal")) s.shape.normal = json_vec(sh["normal"]);
      if (sh.contains("height")) s.shape.height = sh["height"].get<double>();
    }
    if (j.contains("color")) {
      const auto& c = j["color"];
      if (c.contains("model")) s.color.model = model_from(c["model"].get<std::string>());
      if (c.contains("albedo")) s.color.albedo = json_vec(c["albedo"]);
      if (c.contains("light")) s.color.light = json_vec(c["light"]);
      if (c.contains("ambient")) s.color.ambient = c["ambient"].get<double>();
      if (c.contains("specular")) s.color.specular = c["specular"].get<double>();
      if (c.contains("shininess")) s.color.shininess = c["shininess"].get<double>();
    }
    if (j.contains("ring")) {
      const auto& r = j["ring"];
      if (r.contains("count")) s.ring.count = r["count"].get<int>();
      if (r.contains("radius")) s.ring.radius = r["radius"].get<double>();
      if (r.contains("elevation_deg")) s.ring.elevation_deg = r["elevation_deg"].get<double>();
      if (r.contains("alternate_elevation")) s.ring.alternate_elevation = r["alternate_elevation"].get<bool>();
      if (r.contains("width")) s.ring.width = r["width"].get<int>();
      if (r.contains("height")) s.ring.height = r["height"].get<int>();
      if (r.contains("fov_y_deg")) s.ring.fov_y_deg = r["fov_y_deg"].get<double>();
      if (r.contains("near_clip")) s.ring.near_clip = r["near_clip"].get<double>();
      if (r.contains("target")) s.ring.target = json_vec(r["target"]);
    }
    if (j.contains("supersample")) s.supersample = j["supersample"].get<int>();
    if (j.contains("surfel_cover")) s.surfel_cover = j["surfel_cover"].get<bool>();
    if (j.contains("cover_count")) s.cover_count = j["cover_count"].get<std::size_t>();
    if (j.contains("seed")) s.seed = j["seed"].get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scene: malformed descriptor: ") + e.what());
  }
  s.validate();
  return s;
}

void write_cameras(const std::string& path, const std::vector<Camera>& cameras,
                   const std::vector<std::string>& images) {
  if (images.size() != cameras.size()) throw ContractViolation("write_cameras: one image per camera");
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw IoError("cameras: cannot open " + path);
  std::fprintf(f, "# gfs camera file: one block per view; R is world_from_camera (row-major),\n");
  std::fprintf(f, "# t is the camera center in world coordinates.\n");
  std::fprintf(f, "version 1\nviews %zu\n", cameras.size());
  for (std::size_t i = 0; i < cameras.size(); ++i) {
    const Camera& c = cameras[i];
    std::fprintf(f, "view %zu\nimage %s\n", i, images[i].c_str());
    std::fprintf(f, "fx %.17g\nfy %.17g\ncx %.17g\ncy %.17g\n", c.fx, c.fy, c.cx, c.cy);
    std::fprintf(f, "w %d\nh %d\nnear %.17g\n", c.width, c.height, c.near_clip);
    std::fprintf(f, "R");
    for (int r = 0; r < 3; ++r) {
      for (int k = 0; k < 3; ++k) std::fprintf(f, " %.17g", c.rotation(r, k));
    }
    std::fprintf(f, "\nt %.17g %.17g %.17g\n", c.translation.x(), c.translation.y(), c.translation.z());
  }
  const bool ok = std::fclose(f) == 0;
  if (!ok) throw IoError("cameras: write failed for " + path);
}

std::vector<Camera> read_cameras(const std::string& path, std::vector<std::string>* images) {
  std::ifstream in(path);
  if (!in) throw IoError("cameras: cannot open " + path);
  std::vector<Camera> cams;
  std::vector<std::string> names;
  std::string line;
  bool versioned = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    auto need = [&](auto& v) {
      if (!(ls >> v)) throw IoError("cameras: malformed '" + key + "' line in " + path);
    };
    if (key == "version") {
      int v;
      need(v);
      if (v != 1) throw IoError("cameras: unsupported version " + std::to_string(v) + " in " + path);
      versioned = true;
    } else if (key == "views") {
      std::size_t n;
      need(n);
    } else if (key == "view") {
      if (!versioned) throw IoError("cameras: missing version line in " + path);
      cams.emplace_back();
      names.emplace_back();
    } else {
      if (cams.empty()) throw IoError("cameras: '" + key + "' before any view in " + path);
      Camera& c = cams.back();
      if (key == "image") need(names.back());
      else if (key == "fx") need(c.fx);
      else if (key == "fy") need(c.fy);
      else if (key == "cx") need(c.cx);
      else if (key == "cy") need(c.cy);
      else if (key == "w") need(c.width);
      else if (key == "h") need(c.height);
      else if (key == "near") need(c.near_clip);
      else if (key == "R") {
        for (int r = 0; r < 3; ++r) {
          for (int k = 0; k < 3; ++k) need(c.rotation(r, k));
        }
      } else if (key == "t") {
        need(c.translation.x());
        need(c.translation.y());
        need(c.translation.z());
      } else {
        throw IoError("cameras: unknown key '" + key + "' in " + path);
      }
    }
  }
  for (const auto& c : cams) c.validate();
  if (images) *images = names;
  return cams;
}

void save_dataset(const std::string& dir, const SyntheticScene& scene) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "images");
  std::vector<Camera> cams;
  std::vector<std::string> names;
  for (std::size_t i = 0; i < scene.data.views.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "images/%03zu.png", i);
    names.push_back(name);
    cams.push_back(scene.data.views[i].camera);
    write_png((fs::path(dir) / name).string(), scene.data.views[i].image);
  }
  write_cameras((fs::path(dir) / "cameras.txt").string(), cams, names);
  std::ofstream truth(fs::path(dir) / "truth.json");
  if (!truth) throw IoError("dataset: cannot write truth.json in " + dir);
  truth << scene_spec_to_json(scene.spec) << '\n';
}

SyntheticScene load_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  SyntheticScene scene;
  const fs::path truth = fs::path(dir) / "truth.json";
  if (fs::exists(truth)) {
    std::ifstream in(truth);
    std::stringstream ss;
    ss << in.rdbuf();
    scene.spec = scene_spec_from_json(ss.str());
  }
  std::vector<std::string> names;
  const auto cams = read_cameras((fs::path(dir) / "cameras.txt").string(), &names);
  for (std::size_t i = 0; i < cams.size(); ++i) {
    const fs::path img = fs::path(dir) / names[i];
    if (!fs::exists(img)) throw IoError("dataset: missing image file " + img.string());
    View v;
    v.camera = cams[i];
    v.image = read_png(img.string());
    if (v.image.width != v.camera.width || v.image.height != v.camera.height) {
      throw IoError("dataset: image size does not match camera for " + img.string());
    }
    if (v.image.channels != 3) throw IoError("dataset: expected an RGB image: " + img.string());
    scene.data.views.push_back(std::move(v));
  }
  return scene;
}

}  // namespace gfs
