#include "run_config.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>

#include "gfs/errors.hpp"

namespace gfs::cli {

using nlohmann::json;

namespace {

void check_keys(const json& j, const char* section, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(std::string("config: '") + section + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) throw ConfigError(std::string("config: unknown key '") + key + "' in '" + section + "'");
  }
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

Rgb read_rgb(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ConfigError("config: background must be [r, g, b]");
  return Rgb(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

}  // namespace

CompositeMode parse_mode(const std::string& s) {
  if (s == "refined") return CompositeMode::kRefined;
  if (s == "classic") return CompositeMode::kClassic;
  throw ConfigError("unknown compositing mode '" + s + "' (refined|classic)");
}

SortMode parse_sorting(const std::string& s) {
  if (s == "per_ray") return SortMode::kPerRay;
  if (s == "global") return SortMode::kGlobal;
  throw ConfigError("unknown sorting '" + s + "' (per_ray|global)");
}

BlendMode parse_blend(const std::string& s) {
  if (s == "off") return BlendMode::kOff;
  if (s == "per_ray") return BlendMode::kPerRay;
  if (s == "spatial") return BlendMode::kSpatial;
  throw ConfigError("unknown blend mode '" + s + "' (off|per_ray|spatial)");
}

ColorKind parse_color(const std::string& s) {
  if (s == "sh") return ColorKind::kSh;
  if (s == "latent") return ColorKind::kLatent;
  throw ConfigError("unknown color representation '" + s + "' (sh|latent)");
}

std::string name_of(CompositeMode m) { return m == CompositeMode::kRefined ? "refined" : "classic"; }
std::string name_of(SortMode m) { return m == SortMode::kPerRay ? "per_ray" : "global"; }
std::string name_of(BlendMode m) {
  return m == BlendMode::kOff ? "off" : m == BlendMode::kPerRay ? "per_ray" : "spatial";
}
std::string name_of(ColorKind k) { return k == ColorKind::kSh ? "sh" : "latent"; }

void apply_json(const json& j, RunConfig& c) {
  try {
    check_keys(j, "root", {"seed", "workers", "fit", "render", "fusion", "eval", "scene"});
    read(j, "seed", c.seed);
    read(j, "workers", c.workers);
    if (j.contains("fit")) {
      const json& f = j["fit"];
      check_keys(f, "fit", {"iterations", "batch", "surfels", "color", "encoding_degree", "lr",
                            "lr_decay_steps", "spatial_lr_scale", "distortion_from", "normal_from",
                            "blend", "loss", "mode", "sorting", "footprint", "cutoff", "background",
                            "checkpoint_interval"});
      read(f, "iterations", c.fit.iterations);
      read(f, "batch", c.fit.batch);
      read(f, "surfels", c.surfels);
      if (f.contains("color")) c.color = parse_color(f["color"].get<std::string>());
      read(f, "encoding_degree", c.encoding_degree);
      if (f.contains("lr")) {
        const json& l = f["lr"];
        check_keys(l, "fit.lr", {"center", "center_final_ratio", "rotation", "log_scale",
                                 "log_weight", "color", "latent", "net"});
        read(l, "center", c.fit.lr.center);
        read(l, "center_final_ratio", c.fit.lr.center_final_ratio);
        read(l, "rotation", c.fit.lr.rotation);
        read(l, "log_scale", c.fit.lr.log_scale);
        read(l, "log_weight", c.fit.lr.log_weight);
        read(l, "color", c.fit.lr.color);
        read(l, "latent", c.fit.lr.latent);
        read(l, "net", c.fit.lr.net);
      }
      read(f, "lr_decay_steps", c.fit.lr_decay_steps);
      read(f, "spatial_lr_scale", c.fit.spatial_lr_scale);
      read(f, "distortion_from", c.fit.distortion_from);
      read(f, "normal_from", c.fit.normal_from);
      if (f.contains("blend")) {
        const json& b = f["blend"];
        check_keys(b, "fit.blend", {"mode", "tau", "k", "refresh_interval"});
        if (b.contains("mode")) c.fit.blend.mode = parse_blend(b["mode"].get<std::string>());
        read(b, "tau", c.fit.blend.tau);
        read(b, "k", c.fit.blend.k);
        read(b, "refresh_interval", c.fit.blend.refresh_interval);
      }
      if (f.contains("loss")) {
        const json& l = f["loss"];
        check_keys(l, "fit.loss", {"lambda1", "lambda2", "rgb_mix"});
        read(l, "lambda1", c.fit.loss.lambda1);
        read(l, "lambda2", c.fit.loss.lambda2);
        read(l, "rgb_mix", c.fit.loss.rgb_mix);
      }
      if (f.contains("mode")) c.fit.mode = parse_mode(f["mode"].get<std::string>());
      if (f.contains("sorting")) c.fit.sorting = parse_sorting(f["sorting"].get<std::string>());
      if (f.contains("footprint")) {
        const json& p = f["footprint"];
        check_keys(p, "fit.footprint", {"c", "f_max", "fast_path", "normalize"});
        read(p, "c", c.fit.footprint.c);
        read(p, "f_max", c.fit.footprint.f_max);
        read(p, "fast_path", c.fit.footprint.fast_path);
        read(p, "normalize", c.fit.footprint.normalize_s0);
      }
      read(f, "cutoff", c.fit.cutoff);
      if (f.contains("background")) c.fit.background = read_rgb(f["background"]);
      read(f, "checkpoint_interval", c.fit.checkpoint_interval);
    }
    if (j.contains("render")) {
      const json& r = j["render"];
      check_keys(r, "render", {"mode", "sorting", "cutoff", "blend", "tau", "k"});
      if (r.contains("mode")) c.render.mode = parse_mode(r["mode"].get<std::string>());
      if (r.contains("sorting")) c.render.sorting = parse_sorting(r["sorting"].get<std::string>());
      read(r, "cutoff", c.render.cutoff);
      if (r.contains("blend")) c.render.blend = parse_blend(r["blend"].get<std::string>());
      read(r, "tau", c.render.tau);
      read(r, "k", c.render.k);
    }
    if (j.contains("fusion")) {
      const json& u = j["fusion"];
      check_keys(u, "fusion", {"resolution", "truncation_voxels", "min_pixel_weight", "margin", "clean"});
      read(u, "resolution", c.meshing.fusion.resolution);
      read(u, "truncation_voxels", c.meshing.fusion.truncation_voxels);
      read(u, "min_pixel_weight", c.meshing.fusion.min_pixel_weight);
      read(u, "margin", c.meshing.margin);
      read(u, "clean", c.meshing.clean);
    }
    if (j.contains("eval")) {
      const json& e = j["eval"];
      check_keys(e, "eval", {"samples"});
      read(e, "samples", c.eval_samples);
    }
    if (j.contains("scene")) c.scene = scene_spec_from_json(j["scene"].dump());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  json j;
  try {
    j = json::parse(ss.str());
  } catch (const json::exception& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  RunConfig c;
  apply_json(j, c);
  return c;
}

json to_json(const RunConfig& c) {
  const FitConfig& f = c.fit;
  json j;
  j["seed"] = c.seed;
  j["workers"] = c.workers;
  j["fit"] = {
      {"iterations", f.iterations},
      {"batch", f.batch},
      {"surfels", c.surfels},
      {"color", name_of(c.color)},
      {"encoding_degree", c.encoding_degree},
      {"lr", {{"center", f.lr.center}, {"center_final_ratio", f.lr.center_final_ratio},
              {"rotation", f.lr.rotation}, {"log_scale", f.lr.log_scale},
              {"log_weight", f.lr.log_weight}, {"color", f.lr.color},
              {"latent", f.lr.latent}, {"net", f.lr.net}}},
      {"lr_decay_steps", f.lr_decay_steps},
      {"spatial_lr_scale", f.spatial_lr_scale},
      {"distortion_from", f.distortion_from},
      {"normal_from", f.normal_from},
      {"blend", {{"mode", name_of(f.blend.mode)}, {"tau", f.blend.tau}, {"k", f.blend.k},
                 {"refresh_interval", f.blend.refresh_interval}}},
      {"loss", {{"lambda1", f.loss.lambda1}, {"lambda2", f.loss.lambda2}, {"rgb_mix", f.loss.rgb_mix}}},
      {"mode", name_of(f.mode)},
      {"sorting", name_of(f.sorting)},
      {"footprint", {{"c", f.footprint.c}, {"f_max", f.footprint.f_max},
                     {"fast_path", f.footprint.fast_path}, {"normalize", f.footprint.normalize_s0}}},
      {"cutoff", f.cutoff},
      {"background", {f.background[0], f.background[1], f.background[2]}},
      {"checkpoint_interval", f.checkpoint_interval}};
  j["render"] = {{"mode", name_of(c.render.mode)}, {"sorting", name_of(c.render.sorting)},
                 {"cutoff", c.render.cutoff}, {"blend", name_of(c.render.blend)},
                 {"tau", c.render.tau}, {"k", c.render.k}};
  j["fusion"] = {{"resolution", c.meshing.fusion.resolution},
                 {"truncation_voxels", c.meshing.fusion.truncation_voxels},
                 {"min_pixel_weight", c.meshing.fusion.min_pixel_weight},
                 {"margin", c.meshing.margin},
                 {"clean", c.meshing.clean}};
  j["eval"] = {{"samples", c.eval_samples}};
  j["scene"] = json::parse(scene_spec_to_json(c.scene));
  return j;
}

RenderOptions render_options(const RunConfig& c) {
  RenderOptions o;
  o.composite.mode = c.render.mode;
  o.composite.footprint = c.fit.footprint;
  o.composite.background = c.fit.background;
  o.sorting = c.render.sorting;
  o.cutoff = c.render.cutoff;
  o.keep_cache = false;
  o.workers = c.workers;
  if (c.render.blend == BlendMode::kPerRay) o.per_ray_blend_tau = c.render.tau;
  return o;
}

}  // namespace gfs::cli
