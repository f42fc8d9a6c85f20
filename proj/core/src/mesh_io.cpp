#include <fstream>
#include <sstream>

#include "binary_io.hpp"
#include "gfs/errors.hpp"
#include "gfs/fusion.hpp"

namespace gfs {

void write_ply(const std::string& path, const Mesh& mesh, bool binary) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw IoError("ply: cannot open " + path);
  out << "ply\nformat " << (binary ? "binary_little_endian" : "ascii") << " 1.0\n"
      << "element vertex " << mesh.vertices.size() << "\n"
      << "property double x\nproperty double y\nproperty double z\n"
      << "element face " << mesh.triangles.size() << "\n"
      << "property list uchar uint vertex_indices\nend_header\n";
  if (binary) {
    for (const auto& v : mesh.vertices) {
      for (int c = 0; c < 3; ++c) detail::put(out, v[c]);
    }
    for (const auto& t : mesh.triangles) {
      detail::put<std::uint8_t>(out, 3);
      for (int c = 0; c < 3; ++c) detail::put(out, t[c]);
    }
  } else {
    out.precision(17);
    for (const auto& v : mesh.vertices) out << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
    for (const auto& t : mesh.triangles) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  }
  if (!out) throw IoError("ply: write failed for " + path);
}

namespace {

enum class PlyType { kU8, kI8, kU16, kI16, kU32, kI32, kF32, kF64 };

PlyType ply_type(const std::string& name) {
  if (name == "uchar" || name == "uint8") return PlyType::kU8;
  if (name == "char" || name == "int8") return PlyType::kI8;
  if (name == "ushort" || name == "uint16") return PlyType::kU16;
  if (name == "short" || name == "int16") return PlyType::kI16;
  if (name == "uint" || name == "uint32") return PlyType::kU32;
  if (name == "int" || name == "int32") return PlyType::kI32;
  if (name == "float" || name == "float32") return PlyType::kF32;
  if (name == "double" || name == "float64") return PlyType::kF64;
  throw IoError("ply: unknown property type " + name);
}

double read_binary(std::istream& in, PlyType t) {
  switch (t) {
    case PlyType::kU8: return detail::get<std::uint8_t>(in);
    case PlyType::kI8: return detail::get<std::int8_t>(in);
    case PlyType::kU16: return detail::get<std::uint16_t>(in);
    case PlyType::kI16: return detail::get<std::int16_t>(in);
    case PlyType::kU32: return detail::get<std::uint32_t>(in);
    case PlyType::kI32: return detail::get<std::int32_t>(in);
    case PlyType::kF32: return detail::get<float>(in);
    case PlyType::kF64: return detail::get<double>(in);
  }
  return 0.0;
}

struct PlyProperty {
  std::string name;
  PlyType type;
  bool list = false;
  PlyType count_type = PlyType::kU8;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> props;
};

}  // namespace

Mesh read_ply(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("ply: cannot open " + path);
  std::string line;
  std::getline(in, line);
  if (line.rfind("ply", 0) != 0) throw IoError("ply: missing magic in " + path);
  bool binary = false;
  std::vector<PlyElement> elements;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "binary_little_endian") {
        binary = true;
      } else if (fmt != "ascii") {
        throw IoError("ply: unsupported format " + fmt);
      }
    } else if (word == "element") {
      PlyElement e;
      ls >> e.name >> e.count;
      elements.push_back(e);
    } else if (word == "property") {
      if (elements.empty()) throw IoError("ply: property before element");
      PlyProperty p;
      std::string type;
      ls >> type;
      if (type == "list") {
        std::string ct, it;
        ls >> ct >> it >> p.name;
        p.list = true;
        p.count_type = ply_type(ct);
        p.type = ply_type(it);
      } else {
        p.type = ply_type(type);
        ls >> p.name;
      }
      elements.back().props.push_back(p);
    } else if (word == "end_header") {
      break;
    }
  }
  Mesh mesh;
  for (const auto& e : elements) {
    for (std::size_t r = 0; r < e.count; ++r) {
      Vec3 v = Vec3::Zero();
      std::vector<std::uint32_t> face;
      std::istringstream row;
      if (!binary) {
        if (!std::getline(in, line)) throw IoError("ply: truncated data in " + path);
        row.str(line);
      }
      auto scalar = [&](PlyType t) {
        if (binary) return read_binary(in, t);
        double x;
        if (!(row >> x)) throw IoError("ply: malformed row in " + path);
        return x;
      };
      for (const auto& p : e.props) {
        if (p.list) {
          const auto n = std::size_t(scalar(p.count_type));
          for (std::size_t k = 0; k < n; ++k) face.push_back(std::uint32_t(scalar(p.type)));
        } else {
          const double x = scalar(p.type);
          if (p.name == "x") v.x() = x;
          if (p.name == "y") v.y() = x;
          if (p.name == "z") v.z() = x;
        }
      }
      if (e.name == "vertex") mesh.vertices.push_back(v);
      if (e.name == "face") {
        for (std::size_t k = 2; k < face.size(); ++k) mesh.triangles.push_back({face[0], face[k - 1], face[k]});
      }
    }
  }
  for (const auto& t : mesh.triangles) {
    for (auto i : t) {
      if (i >= mesh.vertices.size()) throw IoError("ply: face index out of range in " + path);
    }
  }
  return mesh;
}

void write_obj(const std::string& path, const Mesh& mesh) {
  std::ofstream out(path);
  if (!out) throw IoError("obj: cannot open " + path);
  out.precision(17);
  for (const auto& v : mesh.vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& t : mesh.triangles) {
    out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
  }
  if (!out) throw IoError("obj: write failed for " + path);
}

namespace {
Mesh read_obj(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("obj: cannot open " + path);
  Mesh mesh;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "v") {
      Vec3 v;
      ls >> v.x() >> v.y() >> v.z();
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      std::vector<std::uint32_t> idx;
      std::string tok;
      while (ls >> tok) idx.push_back(std::uint32_t(std::stoul(tok.substr(0, tok.find('/'))) - 1));
      for (std::size_t k = 2; k < idx.size(); ++k) mesh.triangles.push_back({idx[0], idx[k - 1], idx[k]});
    }
  }
  for (const auto& t : mesh.triangles) {
    for (auto i : t) {
      if (i >= mesh.vertices.size()) throw IoError("obj: face index out of range in " + path);
    }
  }
  return mesh;
}
}  // namespace

Mesh read_mesh(const std::string& path) {
  const auto dot = path.rfind('.');
  const std::string ext = dot == std::string::npos ? "" : path.substr(dot);
  if (ext == ".ply") return read_ply(path);
  if (ext == ".obj") return read_obj(path);
  throw IoError("mesh: unknown extension for " + path);
}

}  // namespace gfs
