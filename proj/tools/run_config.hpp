#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "gfs/optimizer.hpp"
#include "gfs/pipeline.hpp"
#include "gfs/scenegen.hpp"

namespace gfs::cli {

struct RenderSettings {
  CompositeMode mode = CompositeMode::kRefined;
  SortMode sorting = SortMode::kPerRay;
  double cutoff = kDefaultCutoff;
  BlendMode blend = BlendMode::kSpatial;
  double tau = 100.0;
  int k = 10;
};

/// Every setting a subcommand can read. Layered as defaults, then the
/// config file, then explicit flags.
struct RunConfig {
  std::uint64_t seed = 0;
  int workers = 0;
  FitConfig fit;
  std::size_t surfels = 4000;
  ColorKind color = ColorKind::kSh;
  int encoding_degree = 4;
  RenderSettings render;
  MeshingConfig meshing;
  std::size_t eval_samples = 1000000;
  SceneSpec scene;
};

/// Overlays the keys present in `j`; unknown keys throw ConfigError.
void apply_json(const nlohmann::json& j, RunConfig& cfg);
RunConfig load_config_file(const std::string& path);
nlohmann::json to_json(const RunConfig& cfg);

RenderOptions render_options(const RunConfig& cfg);

CompositeMode parse_mode(const std::string& s);
SortMode parse_sorting(const std::string& s);
BlendMode parse_blend(const std::string& s);
ColorKind parse_color(const std::string& s);
std::string name_of(CompositeMode m);
std::string name_of(SortMode m);
std::string name_of(BlendMode m);
std::string name_of(ColorKind k);

}  // namespace gfs::cli
