#include <fstream>
#include <nlohmann/json.hpp>

#include "binary_io.hpp"
#include "gfs/surfel.hpp"

namespace gfs {

namespace {

constexpr char kMagic[5] = "GFSS";
constexpr std::uint32_t kVersion = 1;

void put_scalar(std::ostream& out, double v, bool dbl) {
  if (dbl) {
    detail::put<double>(out, v);
  } else {
    detail::put<float>(out, static_cast<float>(v));
  }
}

double get_scalar(std::istream& in, bool dbl) {
  return dbl ? detail::get<double>(in) : double(detail::get<float>(in));
}

}  // namespace

void write_surfels_binary(std::ostream& out, std::span<const Surfel> surfels,
                          bool double_precision) {
  const ColorKind kind = surfels.empty() ? ColorKind::kSh : kind_of(surfels.front().color);
  const int dim = attr_dim(kind);
  for (const auto& s : surfels) {
    if (kind_of(s.color) != kind) throw ContractViolation("surfel file: mixed color kinds");
  }
  detail::put_magic(out, kMagic);
  detail::put<std::uint32_t>(out, kVersion);
  detail::put<std::uint64_t>(out, surfels.size());
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(kind));
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(dim));
  detail::put<std::uint32_t>(out, double_precision ? 8u : 4u);

  auto vec_column = [&](auto getter) {
    for (const auto& s : surfels) {
      const Vec3& v = getter(s);
      for (int k = 0; k < 3; ++k) put_scalar(out, v[k], double_precision);
    }
  };
  vec_column([](const Surfel& s) -> const Vec3& { return s.center; });
  vec_column([](const Surfel& s) -> const Vec3& { return s.tangent_u; });
  vec_column([](const Surfel& s) -> const Vec3& { return s.tangent_v; });
  for (const auto& s : surfels) put_scalar(out, s.scale_u, double_precision);
  for (const auto& s : surfels) put_scalar(out, s.scale_v, double_precision);
  for (const auto& s : surfels) put_scalar(out, s.weight, double_precision);
  for (const auto& s : surfels) detail::put<std::uint32_t>(out, s.id);
  for (const auto& s : surfels) {
    for (double v : attr_values(s.color)) put_scalar(out, v, double_precision);
  }
  if (!out) throw IoError("surfel file: write failed");
}

SurfelSet read_surfels_binary(std::istream& in) {
  detail::expect_magic(in, kMagic, "surfel file");
  const auto version = detail::get<std::uint32_t>(in);
  if (version != kVersion) throw IoError("surfel file: unsupported version " + std::to_string(version));
  const auto count = detail::get<std::uint64_t>(in);
  const auto kind = static_cast<ColorKind>(detail::get<std::uint32_t>(in));
  if (kind != ColorKind::kSh && kind != ColorKind::kLatent) throw IoError("surfel file: bad color kind");
  const auto dim = detail::get<std::uint32_t>(in);
  if (int(dim) != attr_dim(kind)) throw IoError("surfel file: color dimension mismatch");
  const auto bytes = detail::get<std::uint32_t>(in);
  if (bytes != 4 && bytes != 8) throw IoError("surfel file: bad scalar width");
  const bool dbl = bytes == 8;
  if (count > (1ull << 28)) throw IoError("surfel file: implausible surfel count");

  SurfelSet surfels(count);
  for (auto& s : surfels) s.color = make_attr(kind);
  auto vec_column = [&](auto member) {
    for (auto& s : surfels) {
      for (int k = 0; k < 3; ++k) (s.*member)[k] = get_scalar(in, dbl);
    }
  };
  vec_column(&Surfel::center);
  vec_column(&Surfel::tangent_u);
  vec_column(&Surfel::tangent_v);
  for (auto& s : surfels) s.scale_u = get_scalar(in, dbl);
  for (auto& s : surfels) s.scale_v = get_scalar(in, dbl);
  for (auto& s : surfels) s.weight = get_scalar(in, dbl);
  for (auto& s : surfels) s.id = detail::get<std::uint32_t>(in);
  for (auto& s : surfels) {
    for (double& v : attr_values(s.color)) v = get_scalar(in, dbl);
  }
  return surfels;
}

void write_surfels_binary(const std::string& path, std::span<const Surfel> surfels,
                          bool double_precision) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  write_surfels_binary(out, surfels, double_precision);
}

SurfelSet read_surfels_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return read_surfels_binary(in);
}

void write_surfels_text(const std::string& path, std::span<const Surfel> surfels) {
  using nlohmann::json;
  json doc;
  doc["format"] = "gfs-surfels";
  doc["version"] = kVersion;
  json arr = json::array();
  auto vec = [](const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); };
  for (const auto& s : surfels) {
    json j;
    j["id"] = s.id;
    j["center"] = vec(s.center);
    j["tangent_u"] = vec(s.tangent_u);
    j["tangent_v"] = vec(s.tangent_v);
    j["scale"] = {s.scale_u, s.scale_v};
    j["weight"] = s.weight;
    j["color_kind"] = kind_of(s.color) == ColorKind::kSh ? "sh" : "latent";
    auto values = attr_values(s.color);
    j["color"] = std::vector<double>(values.begin(), values.end());
    arr.push_back(std::move(j));
  }
  doc["surfels"] = std::move(arr);
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << doc.dump(1) << '\n';
}

SurfelSet read_surfels_text(const std::string& path) {
  using nlohmann::json;
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw IoError(path + ": " + e.what());
  }
  if (doc.value("format", "") != "gfs-surfels") throw IoError(path + ": not a surfel file");
  if (doc.value("version", 0u) != kVersion) throw IoError(path + ": unsupported version");
  SurfelSet surfels;
  for (const auto& j : doc.at("surfels")) {
    Surfel s;
    auto vec = [&](const char* key) {
      const auto& a = j.at(key);
      return Vec3(a.at(0).get<double>(), a.at(1).get<double>(), a.at(2).get<double>());
    };
    s.id = j.at("id").get<std::uint32_t>();
    s.center = vec("center");
    s.tangent_u = vec("tangent_u");
    s.tangent_v = vec("tangent_v");
    s.scale_u = j.at("scale").at(0).get<double>();
    s.scale_v = j.at("scale").at(1).get<double>();
    s.weight = j.at("weight").get<double>();
    s.color = make_attr(j.at("color_kind").get<std::string>() == "sh" ? ColorKind::kSh
                                                                      : ColorKind::kLatent);
    const auto values = j.at("color").get<std::vector<double>>();
    auto dst = attr_values(s.color);
    if (values.size() != dst.size()) throw IoError(path + ": color length mismatch");
    std::copy(values.begin(), values.end(), dst.begin());
    surfels.push_back(std::move(s));
  }
  return surfels;
}

}  // namespace gfs
