#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gfs/colorprop.hpp"
#include "gfs/errors.hpp"
#include "gfs/fusion.hpp"
#include "gfs/image.hpp"
#include "gfs/optimizer.hpp"
#include "gfs/parallel.hpp"
#include "gfs/pipeline.hpp"
#include "gfs/scenegen.hpp"
#include "gfs/verify.hpp"
#include "run_config.hpp"

#ifndef GFS_GIT_HASH
#define GFS_GIT_HASH "unknown"
#endif
#ifndef GFS_VERSION
#define GFS_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gfs;
using namespace gfs::cli;

namespace {

enum ExitCode { kOk = 0, kFailed = 1, kMissingInput = 2, kBadConfig = 3 };

using Clock = std::chrono::steady_clock;

struct Manifest {
  std::string subcommand;
  std::string path;
  json config;
  json outputs = json::object();
  json timings = json::object();
  Clock::time_point start = Clock::now();

  void time(const std::string& phase, Clock::time_point t0) {
    timings[phase] = std::chrono::duration<double>(Clock::now() - t0).count();
  }

  void write(int exit_code, const std::string& error) {
    if (path.empty()) return;
    json j;
    j["format"] = "gfs-manifest";
    j["subcommand"] = subcommand;
    j["version"] = GFS_VERSION;
    j["code_hash"] = GFS_GIT_HASH;
    j["config"] = config;
    j["seed"] = config.contains("seed") ? config["seed"] : json(nullptr);
    timings["total"] = std::chrono::duration<double>(Clock::now() - start).count();
    j["timings"] = timings;
    j["outputs"] = outputs;
    j["exit_code"] = exit_code;
    if (!error.empty()) j["error"] = error;
    std::error_code ec;
    const fs::path parent = fs::path(path).parent_path();
    if (!parent.empty()) fs::create_directories(parent, ec);
    std::ofstream out(path);
    if (out) out << j.dump(2) << '\n';
    else std::fprintf(stderr, "warning: cannot write manifest %s\n", path.c_str());
  }
};

void require_file(const std::string& path, const char* what) {
  if (path.empty() || !fs::exists(path)) {
    throw IoError(std::string("missing ") + what + ": " + (path.empty() ? "(none given)" : path));
  }
}

std::vector<Camera> load_cameras(const std::string& data) {
  const fs::path p = fs::is_directory(data) ? fs::path(data) / "cameras.txt" : fs::path(data);
  require_file(p.string(), "camera file");
  return read_cameras(p.string(), nullptr);
}

std::optional<SceneSpec> load_truth(const std::string& path) {
  fs::path p = path;
  if (fs::is_directory(p)) p /= "truth.json";
  if (!fs::exists(p)) return std::nullopt;
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return scene_spec_from_json(ss.str());
}

std::vector<ColorAttr> propagated_attrs(const Checkpoint& ck, const RunConfig& cfg) {
  if (cfg.render.blend != BlendMode::kSpatial || ck.scene.surfels.empty()) return {};
  NeighborTable table = ck.table;
  if (table.size() != ck.scene.surfels.size() || table.k != cfg.render.k) {
    std::vector<Vec3> centers;
    for (const auto& s : ck.scene.surfels) centers.push_back(s.center);
    table = knn(centers, cfg.render.k);
  }
  return blend_spatial(ck.scene.surfels, table, cfg.render.tau);
}

void write_image_set(const fs::path& dir, const std::string& stem, const RenderBuffers& buf) {
  write_png((dir / (stem + "color.png")).string(), buf.color_image());
  write_float_grid((dir / (stem + "depth.gfd")).string(), buf.depth_image());
  write_float_grid((dir / (stem + "normal.gfd")).string(), buf.normal_image());
  write_float_grid((dir / (stem + "transmittance.gfd")).string(), buf.transmittance_image());
}

double write_diff(const fs::path& path, const Image& a, const Image& b) {
  Image d(a.width, a.height, a.channels);
  double worst = 0.0;
  for (std::size_t i = 0; i < d.data.size(); ++i) {
    d.data[i] = std::abs(a.data[i] - b.data[i]);
    worst = std::max(worst, d.data[i]);
  }
  write_float_grid(path.string() + ".gfd", d);
  for (double& v : d.data) v = std::min(1.0, 10.0 * v);  // amplified for viewing
  write_png(path.string() + ".png", d);
  return worst;
}

// ---------------------------------------------------------------- verify

struct VerifyArgs {
  std::string check = "all";
  std::optional<double> f;
  std::string mode = "refined";
  std::string json_out;
};

int cmd_verify(const VerifyArgs& a, const RunConfig& cfg, Manifest& m) {
  const auto t0 = Clock::now();
  const CompositeMode mode = parse_mode(a.mode);
  std::vector<CheckResult> results;
  std::vector<bool> expected_fail;
  auto want = [&](const char* name) { return a.check == "all" || a.check == name; };
  bool known = false;
  auto add = [&](CheckResult r, bool xfail = false) {
    results.push_back(std::move(r));
    expected_fail.push_back(xfail);
    known = true;
  };
  if (want("footprint")) add(a.f ? check_footprint_at(*a.f) : check_footprint_closed_form());
  if (want("opacity")) add(check_opacity_clamp());
  if (want("fast_path")) add(check_fast_path());
  if (want("compositing")) {
    if (mode == CompositeMode::kClassic) add(check_classic_bias(cfg.seed + 1), true);
    else add(check_refined_exactness(cfg.seed + 1));
  }
  if (want("merge")) add(check_merge(cfg.seed + 1));
  if (want("oplus")) add(check_oplus_algebra(cfg.seed + 1));
  if (want("gradients")) add(check_gradients(cfg.seed + 1));
  if (want("continuity")) add(check_continuity());
  if (want("knn")) add(check_spatial_blend(cfg.seed + 1));
  if (!known) {
    throw ConfigError("unknown check '" + a.check +
                      "' (all|footprint|opacity|fast_path|compositing|merge|oplus|gradients|continuity|knn)");
  }
  m.time("checks", t0);

  std::printf("%-32s %-7s %-13s %-13s %s\n", "check", "status", "measured", "tolerance", "seconds");
  std::vector<std::string> failing;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    const char* status = expected_fail[i] ? (r.pass ? "XFAIL" : "FAIL") : (r.pass ? "PASS" : "FAIL");
    std::printf("%-32s %-7s %-13.6g %-13.6g %.3f\n", r.name.c_str(), status, r.measured, r.tolerance,
                r.seconds);
    std::printf("    %s\n", r.detail.c_str());
    if (!r.pass) failing.push_back(r.name);
  }
  const std::string report = verification_report(results);
  if (!a.json_out.empty()) {
    std::ofstream out(a.json_out);
    if (!out) throw IoError("cannot write " + a.json_out);
    out << report << '\n';
    m.outputs["report"] = a.json_out;
  }
  m.outputs["checks"] = json::parse(report)["checks"];
  if (!failing.empty()) {
    std::string names;
    for (const auto& n : failing) names += (names.empty() ? "" : ", ") + n;
    std::fprintf(stderr, "verification failed: %s\n", names.c_str());
    return kFailed;
  }
  return kOk;
}

// ---------------------------------------------------------------- make-scene

int cmd_make_scene(const std::string& out, const RunConfig& cfg, Manifest& m) {
  const auto t0 = Clock::now();
  const SyntheticScene scene = make_scene(cfg.scene);
  m.time("generate", t0);
  const auto t1 = Clock::now();
  save_dataset(out, scene);
  m.time("write", t1);
  m.outputs["dataset"] = out;
  m.outputs["views"] = scene.data.views.size();
  std::printf("wrote %zu views to %s\n", scene.data.views.size(), out.c_str());
  return kOk;
}

// ---------------------------------------------------------------- fit

struct FitArgs {
  std::string data;
  std::string out;
  std::string resume;
};

void rewrite_csv_prefix(const fs::path& csv, int keep_below) {
  std::vector<std::string> lines;
  if (std::ifstream in(csv); in) {
    std::string line;
    while (std::getline(in, line)) {
      if (lines.empty()) {
        lines.push_back(line);  // header
        continue;
      }
      if (std::atoi(line.c_str()) < keep_below) lines.push_back(line);
    }
  }
  std::ofstream out(csv, std::ios::trunc);
  if (lines.empty()) out << "iteration,view,rgb,distortion,normal,total\n";
  for (const auto& l : lines) out << l << '\n';
}

int cmd_fit(const FitArgs& a, RunConfig cfg, Manifest& m) {
  require_file(a.data, "dataset");
  const auto t0 = Clock::now();
  const SyntheticScene dataset = load_dataset(a.data);
  m.time("load", t0);
  fs::create_directories(a.out);
  const fs::path out(a.out);
  const fs::path ck_path = out / "checkpoint.gfck";
  cfg.fit.seed = cfg.seed;
  cfg.fit.workers = cfg.workers;
  cfg.fit.checkpoint_path = ck_path.string();

  Checkpoint start;
  if (!a.resume.empty()) {
    require_file(a.resume, "checkpoint");
    start = load_checkpoint(a.resume);
  } else {
    start.scene = initial_scene(dataset.spec.shape, cfg.surfels, cfg.color, cfg.encoding_degree,
                                cfg.seed);
  }
  const fs::path csv = out / "loss.csv";
  rewrite_csv_prefix(csv, start.iteration);
  std::ofstream log(csv, std::ios::app);
  if (!log) throw IoError("cannot write " + csv.string());
  log.precision(10);

  const auto t1 = Clock::now();
  Optimizer opt(cfg.fit, std::move(start));
  const int first = opt.checkpoint().iteration;
  opt.run(dataset.data, [&](const LossRecord& r) {
    log << r.iteration << ',' << r.view << ',' << r.terms.rgb << ',' << r.terms.distortion << ','
        << r.terms.normal << ',' << r.terms.total << '\n';
    if ((r.iteration + 1) % 100 == 0) {
      std::printf("iteration %d  loss %.5f (rgb %.5f)\n", r.iteration + 1, r.terms.total, r.terms.rgb);
      std::fflush(stdout);
    }
  });
  log.flush();
  m.time("optimize", t1);
  save_checkpoint(ck_path.string(), opt.checkpoint());

  const auto t2 = Clock::now();
  const auto attrs = opt.render_attrs();
  RenderOptions ro = cfg.fit.render_options();
  ro.keep_cache = false;
  const Checkpoint& ck = opt.checkpoint();
  const ShadingNet* net = ck.scene.net ? &*ck.scene.net : nullptr;
  if (!dataset.data.views.empty()) {
    const Camera& cam = dataset.data.views.front().camera;
    const auto shaded = shade_surfels(cam, ck.scene.surfels, net, attrs);
    write_png((out / "validation_000.png").string(),
              render(cam, ck.scene.surfels, shaded.colors, ro).color_image());
    m.outputs["mean_psnr"] = mean_psnr(dataset.data, ck.scene, attrs, ro);
  }
  m.time("validate", t2);
  m.outputs["checkpoint"] = ck_path.string();
  m.outputs["loss_csv"] = csv.string();
  m.outputs["iterations_run"] = ck.iteration - first;
  m.outputs["iterations_total"] = ck.iteration;
  m.outputs["parameters"] = parameter_count(ck.scene);
  std::printf("fit: %d iterations, checkpoint %s\n", ck.iteration, ck_path.string().c_str());
  return kOk;
}

// ---------------------------------------------------------------- render

struct RenderArgs {
  std::string checkpoint;
  std::string data;
  int view = 0;
  std::string out;
  bool diff = false;
};

int cmd_render(const RenderArgs& a, const RunConfig& cfg, Manifest& m) {
  require_file(a.checkpoint, "checkpoint");
  require_file(a.data, "dataset or camera file");
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  const auto cams = load_cameras(a.data);
  if (a.view < 0 || std::size_t(a.view) >= cams.size()) {
    throw ConfigError("view " + std::to_string(a.view) + " out of range (" +
                      std::to_string(cams.size()) + " cameras)");
  }
  const Camera& cam = cams[std::size_t(a.view)];
  const auto attrs = propagated_attrs(ck, cfg);
  const ShadingNet* net = ck.scene.net ? &*ck.scene.net : nullptr;
  const auto shaded = shade_surfels(cam, ck.scene.surfels, net, attrs);
  fs::create_directories(a.out);
  const fs::path out(a.out);
  const auto t0 = Clock::now();
  const RenderOptions ro = render_options(cfg);
  const RenderBuffers buf = render(cam, ck.scene.surfels, shaded.colors, ro);
  m.time("render", t0);
  write_image_set(out, "", buf);
  m.outputs["color"] = (out / "color.png").string();
  if (a.diff) {
    RenderOptions other_mode = ro;
    other_mode.composite.mode = ro.composite.mode == CompositeMode::kRefined ? CompositeMode::kClassic
                                                                            : CompositeMode::kRefined;
    RenderOptions other_sort = ro;
    other_sort.sorting = ro.sorting == SortMode::kPerRay ? SortMode::kGlobal : SortMode::kPerRay;
    other_sort.per_ray_blend_tau.reset();
    const auto bm = render(cam, ck.scene.surfels, shaded.colors, other_mode);
    const auto bs = render(cam, ck.scene.surfels, shaded.colors, other_sort);
    RenderOptions refined = ro;
    refined.per_ray_blend_tau.reset();
    refined.sorting = SortMode::kPerRay;
    const auto ref = render(cam, ck.scene.surfels, shaded.colors, refined);
    m.outputs["max_diff_refined_classic"] =
        write_diff(out / "diff_refined_classic", buf.color_image(), bm.color_image());
    m.outputs["max_diff_per_ray_global"] = write_diff(
        out / "diff_per_ray_global",
        ro.sorting == SortMode::kPerRay ? ref.color_image() : bs.color_image(),
        ro.sorting == SortMode::kPerRay ? bs.color_image() : ref.color_image());
  }
  std::printf("rendered view %d to %s\n", a.view, a.out.c_str());
  return kOk;
}

// ---------------------------------------------------------------- mesh

struct MeshArgs {
  std::string checkpoint;
  std::string data;
  std::string out;
};

int cmd_mesh(const MeshArgs& a, const RunConfig& cfg, Manifest& m) {
  require_file(a.checkpoint, "checkpoint");
  require_file(a.data, "dataset or camera file");
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  const auto cams = load_cameras(a.data);
  Mesh mesh;
  if (ck.scene.surfels.empty()) {
    std::fprintf(stderr, "warning: checkpoint has no surfels; writing an empty mesh\n");
  } else {
    Vec3 lo, hi;
    if (const auto truth = load_truth(a.data)) {
      std::tie(lo, hi) = truth->shape.bounds();
    } else {
      lo = hi = ck.scene.surfels.front().center;
      for (const auto& s : ck.scene.surfels) {
        lo = lo.cwiseMin(s.center);
        hi = hi.cwiseMax(s.center);
      }
    }
    RenderOptions ro = render_options(cfg);
    ro.per_ray_blend_tau.reset();
    const auto t0 = Clock::now();
    mesh = extract_mesh(ck.scene.surfels, cams, ro, cfg.meshing, lo, hi);
    m.time("extract", t0);
    if (mesh.empty()) std::fprintf(stderr, "warning: fused grid has no zero crossing; mesh is empty\n");
  }
  const std::string ext = fs::path(a.out).extension().string();
  if (!fs::path(a.out).parent_path().empty()) fs::create_directories(fs::path(a.out).parent_path());
  if (ext == ".obj") write_obj(a.out, mesh);
  else if (ext == ".ply") write_ply(a.out, mesh);
  else throw ConfigError("mesh output must end in .ply or .obj: " + a.out);
  const MeshReport rep = inspect_mesh(mesh);
  m.outputs["mesh"] = a.out;
  m.outputs["vertices"] = mesh.vertices.size();
  m.outputs["triangles"] = mesh.triangles.size();
  m.outputs["boundary_edges"] = rep.boundary_edges;
  m.outputs["nonmanifold_edges"] = rep.nonmanifold_edges;
  std::printf("mesh: %zu vertices, %zu triangles -> %s\n", mesh.vertices.size(),
              mesh.triangles.size(), a.out.c_str());
  return kOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string mesh;
  std::string truth;
  std::string reference;
  std::string out;
};

int cmd_eval(const EvalArgs& a, const RunConfig& cfg, Manifest& m) {
  require_file(a.mesh, "mesh");
  const Mesh mesh = read_mesh(a.mesh);
  if (mesh.empty()) throw DomainError("mesh " + a.mesh + " is empty");
  const auto t0 = Clock::now();
  json metrics;
  metrics["mesh"] = a.mesh;
  metrics["samples"] = cfg.eval_samples;
  if (!a.reference.empty()) {
    require_file(a.reference, "reference mesh");
    const Mesh ref = read_mesh(a.reference);
    if (ref.empty()) throw DomainError("reference mesh " + a.reference + " is empty");
    const auto pa = sample_mesh(mesh, cfg.eval_samples, cfg.seed);
    const auto pb = sample_mesh(ref, cfg.eval_samples, cfg.seed);
    const ChamferResult c = chamfer(pa, pb);
    metrics["reference"] = a.reference;
    metrics["chamfer"] = {{"a_to_b", c.a_to_b}, {"b_to_a", c.b_to_a}, {"symmetric", c.symmetric}};
  } else {
    require_file(a.truth, "truth descriptor");
    const auto truth = load_truth(a.truth);
    if (!truth) throw IoError("missing truth descriptor: " + a.truth);
    const MeshMetrics mm = evaluate_mesh(mesh, truth->shape, cfg.eval_samples, cfg.seed);
    metrics["truth"] = a.truth;
    metrics["chamfer"] = {{"a_to_b", mm.chamfer.a_to_b},
                          {"b_to_a", mm.chamfer.b_to_a},
                          {"symmetric", mm.chamfer.symmetric}};
    metrics["mean_surface_distance"] = mm.mean_surface_distance;
  }
  metrics["triangles"] = mesh.triangles.size();
  m.time("evaluate", t0);
  const fs::path out(a.out);
  if (!out.parent_path().empty()) fs::create_directories(out.parent_path());
  std::ofstream js(out);
  if (!js) throw IoError("cannot write " + a.out);
  js << metrics.dump(2) << '\n';
  fs::path csv = out;
  csv.replace_extension(".csv");
  std::ofstream cs(csv);
  cs << "metric,value\n";
  cs.precision(10);
  for (const char* k : {"a_to_b", "b_to_a", "symmetric"}) {
    cs << "chamfer_" << k << ',' << metrics["chamfer"][k].get<double>() << '\n';
  }
  if (metrics.contains("mean_surface_distance")) {
    cs << "mean_surface_distance," << metrics["mean_surface_distance"].get<double>() << '\n';
  }
  m.outputs["metrics"] = metrics;
  std::printf("symmetric chamfer %.6f\n", metrics["chamfer"]["symmetric"].get<double>());
  return kOk;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const IoError*>(&e)) return kMissingInput;
  if (dynamic_cast<const ConfigError*>(&e)) return kBadConfig;
  return kFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Geometry-field splatting with Gaussian surfels"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(GFS_VERSION) + " (" + GFS_GIT_HASH + ")");

  std::string config_path, manifest_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file (defaults < file < flags)");
    sub->add_option("--seed", seed, "Random seed");
    sub->add_option("--workers", workers, "Worker threads (overrides GFS_WORKERS)");
    sub->add_option("--manifest", manifest_path, "Run manifest path");
  };

  // Flags that override the config when given.
  std::optional<std::string> mode, sorting, blend, color;
  std::optional<int> iterations, grid, checkpoint_interval;
  std::optional<std::size_t> surfels, samples;
  std::optional<double> trunc, lambda1, lambda2;
  bool no_clean = false;

  VerifyArgs va;
  auto* verify = app.add_subcommand("verify", "Run the certification suite");
  common(verify);
  verify->add_option("--check", va.check, "Single check (footprint, opacity, fast_path, compositing, merge, oplus, gradients, continuity, knn)");
  verify->add_option("--f", va.f, "Kernel value for the single footprint check");
  verify->add_option("--mode", va.mode, "Compositing backend for the compositing check");
  verify->add_option("--json", va.json_out, "Write the report as JSON");

  std::string scene_out, spec_path;
  std::optional<std::string> shape, color_model;
  std::optional<int> views, resolution;
  bool cover = false;
  auto* make = app.add_subcommand("make-scene", "Generate a synthetic dataset");
  common(make);
  make->add_option("--out", scene_out, "Dataset directory")->required();
  make->add_option("--spec", spec_path, "Scene descriptor JSON");
  make->add_option("--shape", shape, "sphere|box|step|disk");
  make->add_option("--color-model", color_model, "constant|sh_sky|specular_probe");
  make->add_option("--views", views, "Number of ring cameras");
  make->add_option("--res", resolution, "Image width and height");
  make->add_flag("--surfel-cover", cover, "Render targets from a surfel cover");

  FitArgs fa;
  auto* fitc = app.add_subcommand("fit", "Optimize surfels against a dataset");
  common(fitc);
  fitc->add_option("--data", fa.data, "Dataset directory")->required();
  fitc->add_option("--out", fa.out, "Output directory")->required();
  fitc->add_option("--resume", fa.resume, "Continue from a checkpoint");
  fitc->add_option("--color", color, "sh|latent");
  fitc->add_option("--surfels", surfels, "Surfel count");
  fitc->add_option("--iterations", iterations, "Total iterations");
  fitc->add_option("--mode", mode, "refined|classic");
  fitc->add_option("--sorting", sorting, "global|per_ray");
  fitc->add_option("--blend", blend, "off|spatial");
  fitc->add_option("--lambda1", lambda1, "Depth distortion weight");
  fitc->add_option("--lambda2", lambda2, "Normal consistency weight");
  fitc->add_option("--checkpoint-interval", checkpoint_interval, "Iterations between checkpoints");

  RenderArgs ra;
  auto* rend = app.add_subcommand("render", "Render a checkpoint from a dataset camera");
  common(rend);
  rend->add_option("--checkpoint", ra.checkpoint, "Checkpoint file")->required();
  rend->add_option("--data", ra.data, "Dataset directory or camera file")->required();
  rend->add_option("--view", ra.view, "Camera index");
  rend->add_option("--out", ra.out, "Output directory")->required();
  rend->add_option("--mode", mode, "refined|classic");
  rend->add_option("--sorting", sorting, "per_ray|global");
  rend->add_option("--blend", blend, "off|per_ray|spatial");
  rend->add_flag("--diff", ra.diff, "Also emit refined/classic and per-ray/global difference images");

  MeshArgs ma;
  auto* meshc = app.add_subcommand("mesh", "Fuse rendered depth into a mesh");
  common(meshc);
  meshc->add_option("--checkpoint", ma.checkpoint, "Checkpoint file")->required();
  meshc->add_option("--data", ma.data, "Dataset directory or camera file")->required();
  meshc->add_option("--out", ma.out, "Mesh file (.ply or .obj)")->required();
  meshc->add_option("--grid", grid, "TSDF resolution along the longest axis");
  meshc->add_option("--trunc", trunc, "Truncation in voxels");
  meshc->add_option("--mode", mode, "refined|classic");
  meshc->add_option("--sorting", sorting, "per_ray|global");
  meshc->add_flag("--no-clean", no_clean, "Keep triangles no camera sees");

  EvalArgs ea;
  auto* evalc = app.add_subcommand("eval", "Chamfer distance of a mesh");
  common(evalc);
  evalc->add_option("--mesh", ea.mesh, "Mesh file")->required();
  evalc->add_option("--truth", ea.truth, "Truth descriptor or dataset directory");
  evalc->add_option("--reference", ea.reference, "Reference mesh instead of a truth descriptor");
  evalc->add_option("--out", ea.out, "Metrics JSON path")->required();
  evalc->add_option("--samples", samples, "Surface samples per side");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kBadConfig;
  }

  CLI::App* sub = app.get_subcommands().front();
  Manifest m;
  m.subcommand = sub->get_name();
  if (!manifest_path.empty()) {
    m.path = manifest_path;
  } else if (sub == verify) {
    m.path = va.json_out.empty() ? "" : va.json_out + ".manifest.json";
  } else if (sub == make) {
    m.path = (fs::path(scene_out) / "manifest.json").string();
  } else if (sub == fitc) {
    m.path = (fs::path(fa.out) / "manifest.json").string();
  } else if (sub == rend) {
    m.path = (fs::path(ra.out) / "manifest.json").string();
  } else if (sub == meshc) {
    m.path = ma.out + ".manifest.json";
  } else if (sub == evalc) {
    m.path = ea.out + ".manifest.json";
  }
  if (m.path.empty()) m.path = "gfs-" + m.subcommand + ".manifest.json";

  int code = kOk;
  std::string error;
  try {
    RunConfig cfg;
    if (!config_path.empty()) {
      require_file(config_path, "config file");
      cfg = load_config_file(config_path);
    }
    if (const char* env = std::getenv("GFS_WORKERS"); env && *env) {
      try {
        cfg.workers = std::stoi(env);
      } catch (const std::exception&) {
        throw ConfigError(std::string("GFS_WORKERS is not an integer: ") + env);
      }
    }
    if (workers) cfg.workers = *workers;
    if (seed) cfg.seed = *seed;
    if (cfg.workers < 0) throw ConfigError("workers must be >= 0");
    set_default_workers(cfg.workers);
    if (sub == make) {
      if (!spec_path.empty()) {
        require_file(spec_path, "scene descriptor");
        std::ifstream in(spec_path);
        std::stringstream ss;
        ss << in.rdbuf();
        cfg.scene = scene_spec_from_json(ss.str());
      }
      json patch = json::parse(scene_spec_to_json(cfg.scene));
      if (shape) patch["shape"]["kind"] = *shape;
      if (color_model) patch["color"]["model"] = *color_model;
      if (views) patch["ring"]["count"] = *views;
      if (resolution) patch["ring"]["width"] = patch["ring"]["height"] = *resolution;
      if (cover) patch["surfel_cover"] = true;
      if (seed) patch["seed"] = *seed;
      cfg.scene = scene_spec_from_json(patch.dump());
    }
    if (color) cfg.color = parse_color(*color);
    if (surfels) cfg.surfels = *surfels;
    if (iterations) cfg.fit.iterations = *iterations;
    if (lambda1) cfg.fit.loss.lambda1 = *lambda1;
    if (lambda2) cfg.fit.loss.lambda2 = *lambda2;
    if (checkpoint_interval) cfg.fit.checkpoint_interval = *checkpoint_interval;
    if (sub == fitc) {
      if (mode) cfg.fit.mode = parse_mode(*mode);
      if (sorting) cfg.fit.sorting = parse_sorting(*sorting);
      if (blend) cfg.fit.blend.mode = parse_blend(*blend);
    } else {
      if (mode) cfg.render.mode = parse_mode(*mode);
      if (sorting) cfg.render.sorting = parse_sorting(*sorting);
      if (blend) cfg.render.blend = parse_blend(*blend);
    }
    if (grid) cfg.meshing.fusion.resolution = *grid;
    if (trunc) cfg.meshing.fusion.truncation_voxels = *trunc;
    if (no_clean) cfg.meshing.clean = false;
    if (samples) cfg.eval_samples = *samples;
    m.config = to_json(cfg);

    if (sub == verify) code = cmd_verify(va, cfg, m);
    else if (sub == make) code = cmd_make_scene(scene_out, cfg, m);
    else if (sub == fitc) code = cmd_fit(fa, cfg, m);
    else if (sub == rend) code = cmd_render(ra, cfg, m);
    else if (sub == meshc) code = cmd_mesh(ma, cfg, m);
    else if (sub == evalc) code = cmd_eval(ea, cfg, m);
  } catch (const std::exception& e) {
    code = exit_code_for(e);
    error = e.what();
    std::fprintf(stderr, "error: %s\n", e.what());
  }
  m.write(code, error);
  return code;
}
