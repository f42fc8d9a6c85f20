// Acceptance runner. Prints one [PASS]/[FAIL] line per criterion and exits
// non-zero when any criterion in the selected group fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gfs/errors.hpp"
#include "gfs/pipeline.hpp"
#include "gfs/verify.hpp"

namespace fs = std::filesystem;
using namespace gfs;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

void report(std::vector<Outcome>& out, int id, const std::string& name, bool pass,
            const std::string& detail) {
  std::printf("[%s] %d %s: %s\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
  out.push_back({id, name, pass, detail});
}

// A property check counts only when it also meets its runtime budget.
void from_check(std::vector<Outcome>& out, int id, const CheckResult& r, double budget_s) {
  const bool fast = r.seconds < budget_s;
  std::string detail = r.detail + " (measured " + fmt("%.3g", r.measured) + ", tolerance " +
                       fmt("%.3g", r.tolerance) + ", " + fmt("%.2f", r.seconds) + " s";
  if (!fast) detail += " over the " + fmt("%.0f", budget_s) + " s budget";
  report(out, id, r.name, r.pass && fast, detail + ")");
}

void properties(std::vector<Outcome>& out, std::uint64_t seed) {
  from_check(out, 1, check_footprint_closed_form(), 10.0);
  from_check(out, 2, check_opacity_clamp(), 1.0);
  from_check(out, 3, check_fast_path(), 1.0);
  const auto exact = check_refined_exactness(seed, 1000);
  const auto bias = check_classic_bias(seed, 1000);
  const double secs = exact.seconds + bias.seconds;
  report(out, 4, "refined_exactness", exact.pass && bias.pass && secs < 60.0,
         "refined max error " + fmt("%.3g", exact.measured) + " (<= 1e-6), classic max error " +
             fmt("%.3g", bias.measured) + " (>= 1e-2), " + fmt("%.2f", secs) + " s");
  from_check(out, 5, check_merge(seed, 1000), 5.0);
  from_check(out, 6, check_oplus_algebra(seed, 10000), 5.0);
  from_check(out, 7, check_gradients(seed, 50), 120.0);
  from_check(out, 8, check_continuity(1000), 10.0);
  from_check(out, 9, check_spatial_blend(seed, 4), 10.0);
}

struct FitRun {
  Checkpoint ck;
  std::vector<double> losses;
  double seconds = 0.0;
};

FitRun run_fit(const SyntheticScene& scene, const Scene& init, const FitConfig& cfg,
               const fs::path& dir, const std::string& tag) {
  FitRun run;
  const auto t0 = Clock::now();
  std::ofstream log(dir / (tag + "_loss.csv"));
  log << "iteration,view,rgb,distortion,normal,total\n";
  run.ck = fit(scene.data, init, cfg, [&](const LossRecord& r) {
    run.losses.push_back(r.terms.total);
    log << r.iteration << ',' << r.view << ',' << r.terms.rgb << ',' << r.terms.distortion << ','
        << r.terms.normal << ',' << r.terms.total << '\n';
    if (r.iteration % 500 == 0) {
      std::printf("  %s iteration %d loss %.5f (%.0f s)\n", tag.c_str(), r.iteration,
                  r.terms.total, since(t0));
      std::fflush(stdout);
    }
  });
  run.seconds = since(t0);
  save_checkpoint((dir / (tag + ".gfck")).string(), run.ck);
  return run;
}

// Soft check: the window-100 moving average should not rise over the run.
void loss_trend_warning(const std::vector<double>& losses, int from, const std::string& tag) {
  const std::size_t w = 100;
  if (losses.size() < std::size_t(from) + 2 * w) return;
  auto mean = [&](std::size_t a) {
    return std::accumulate(losses.begin() + a, losses.begin() + a + w, 0.0) / double(w);
  };
  const double first = mean(std::size_t(from)), last = mean(losses.size() - w);
  if (last > first) {
    std::printf("[WARN] %s smoothed loss rose from %.5f to %.5f\n", tag.c_str(), first, last);
  }
}

struct Reconstruction {
  double chamfer = 0.0;
  double psnr = 0.0;
  double seconds = 0.0;
  std::size_t triangles = 0;
};

Reconstruction reconstruct(const SyntheticScene& scene, CompositeMode mode, std::uint64_t seed,
                           const fs::path& dir, const std::string& tag) {
  FitConfig cfg;
  cfg.iterations = 5000;
  cfg.seed = seed;
  cfg.mode = mode;
  const Scene init = initial_scene(scene.spec.shape, 4000, ColorKind::kSh, 4, seed);
  const FitRun run = run_fit(scene, init, cfg, dir, tag);
  loss_trend_warning(run.losses, cfg.normal_from, tag);

  Reconstruction r;
  const auto t0 = Clock::now();
  RenderOptions ro = cfg.render_options();
  ro.keep_cache = false;
  const auto cams = make_ring(scene.spec.ring);
  const auto [lo, hi] = scene.spec.shape.bounds();
  MeshingConfig mc;
  mc.fusion.resolution = 128;
  const Mesh mesh = extract_mesh(run.ck.scene.surfels, cams, ro, mc, lo, hi);
  write_ply((dir / (tag + ".ply")).string(), mesh);
  r.triangles = mesh.triangles.size();
  r.chamfer = mesh.empty() ? std::numeric_limits<double>::infinity()
                           : evaluate_mesh(mesh, scene.spec.shape, 1000000, seed).chamfer.symmetric;
  Optimizer view(cfg, run.ck);
  r.psnr = mean_psnr(scene.data, run.ck.scene, view.render_attrs(), ro);
  r.seconds = run.seconds + since(t0);
  std::printf("  %s chamfer %.5f psnr %.2f dB triangles %zu (%.0f s)\n", tag.c_str(), r.chamfer,
              r.psnr, r.triangles, r.seconds);
  return r;
}

void reconstruction(std::vector<Outcome>& out, std::uint64_t seed, const fs::path& dir) {
  SceneSpec spec;
  spec.seed = seed;
  const SyntheticScene scene = make_scene(spec);
  const Reconstruction refined = reconstruct(scene, CompositeMode::kRefined, seed, dir, "refined");
  report(out, 10, "sphere_reconstruction", refined.chamfer <= 0.02,
         "symmetric chamfer " + fmt("%.5f", refined.chamfer) + " (<= 0.02), psnr " +
             fmt("%.2f", refined.psnr) + " dB, " + fmt("%.0f", refined.seconds) + " s");
  const Reconstruction classic = reconstruct(scene, CompositeMode::kClassic, seed, dir, "classic");
  report(out, 11, "classic_ablation_direction", classic.chamfer >= refined.chamfer,
         "classic chamfer " + fmt("%.5f", classic.chamfer) + " vs refined " +
             fmt("%.5f", refined.chamfer) + ", " + fmt("%.0f", classic.seconds) + " s");
}

// Largest SH surfel count whose parameter total does not exceed `budget`.
std::size_t sh_count_for_budget(std::size_t budget) {
  Scene one;
  one.surfels = init_surfels(Vec3::Zero(), Vec3::Ones(), 1, 0, ColorKind::kSh);
  return budget / parameter_count(one);
}

void specular(std::vector<Outcome>& out, std::uint64_t seed, const fs::path& dir) {
  SceneSpec spec;
  spec.seed = seed;
  spec.color.model = ColorModel::kSpecularProbe;
  const SyntheticScene scene = make_scene(spec);

  FitConfig cfg;
  cfg.iterations = 3000;
  cfg.seed = seed;
  const Scene latent_init = initial_scene(spec.shape, 3000, ColorKind::kLatent, 4, seed);
  const std::size_t budget = parameter_count(latent_init);
  const std::size_t n_sh = sh_count_for_budget(budget);
  const Scene sh_init = initial_scene(spec.shape, n_sh, ColorKind::kSh, 4, seed);
  std::printf("  parameter budget %zu: latent %zu surfels, sh %zu surfels (%zu parameters)\n",
              budget, latent_init.surfels.size(), n_sh, parameter_count(sh_init));

  const auto t0 = Clock::now();
  RenderOptions ro = cfg.render_options();
  ro.keep_cache = false;
  auto score = [&](const Scene& init, const std::string& tag) {
    const FitRun run = run_fit(scene, init, cfg, dir, tag);
    Optimizer view(cfg, run.ck);
    const double p = mean_psnr(scene.data, run.ck.scene, view.render_attrs(), ro);
    std::printf("  %s psnr %.2f dB (%.0f s)\n", tag.c_str(), p, run.seconds);
    return p;
  };
  const double p_latent = score(latent_init, "latent");
  const double p_sh = score(sh_init, "sh");
  const double gain = p_latent - p_sh;
  report(out, 12, "specular_latent_vs_sh", gain >= 3.0,
         "latent " + fmt("%.2f", p_latent) + " dB vs sh " + fmt("%.2f", p_sh) + " dB, gain " +
             fmt("%.2f", gain) + " dB (>= 3), " + fmt("%.0f", since(t0)) + " s");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gfs acceptance runner"};
  std::string group = "all";
  std::string workdir = "acceptance_out";
  std::uint64_t seed = 1;
  app.add_option("--group", group, "properties | reconstruction | specular | all")
      ->check(CLI::IsMember({"properties", "reconstruction", "specular", "all"}));
  app.add_option("--workdir", workdir, "directory for fit logs, checkpoints and meshes");
  app.add_option("--seed", seed, "base seed");
  CLI11_PARSE(app, argc, argv);

  std::vector<Outcome> out;
  try {
    if (group == "properties" || group == "all") properties(out, seed);
    if (group != "properties") fs::create_directories(workdir);
    if (group == "reconstruction" || group == "all") reconstruction(out, seed, workdir);
    if (group == "specular" || group == "all") specular(out, seed, workdir);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "acceptance aborted: %s\n", e.what());
    return 1;
  }
  const auto failed = std::count_if(out.begin(), out.end(), [](const Outcome& o) { return !o.pass; });
  std::printf("%zu criteria, %ld failed\n", out.size(), long(failed));
  return failed == 0 ? 0 : 1;
}
