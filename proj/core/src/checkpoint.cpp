#include <algorithm>
#include <cstdio>
#include <fstream>

#include "binary_io.hpp"
#include "gfs/errors.hpp"
#include "gfs/optimizer.hpp"

namespace gfs {

namespace {
constexpr std::uint32_t kCheckpointVersion = 1;

void put_doubles(std::ostream& out, const std::vector<double>& v) {
  detail::put<std::uint64_t>(out, v.size());
  for (double x : v) detail::put(out, x);
}

std::vector<double> get_doubles(std::istream& in) {
  const auto n = detail::get<std::uint64_t>(in);
  if (n > (1ull << 34)) throw IoError("checkpoint: array length out of range");
  std::vector<double> v(n);
  for (auto& x : v) x = detail::get<double>(in);
  return v;
}
}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("checkpoint: cannot open " + tmp);
    detail::put_magic(out, "GFCK");
    detail::put(out, kCheckpointVersion);
    detail::put(out, ck.config_hash);
    detail::put<std::int64_t>(out, ck.iteration);
    write_surfels_binary(out, ck.scene.surfels, true);
    detail::put<std::uint8_t>(out, ck.scene.net ? 1 : 0);
    if (ck.scene.net) {
      detail::put<std::uint32_t>(out, std::uint32_t(ck.scene.net->encoding_degree()));
      detail::put<std::uint32_t>(out, std::uint32_t(ck.scene.net->hidden()));
      const auto params = ck.scene.net->parameters();
      put_doubles(out, std::vector<double>(params.begin(), params.end()));
    }
    detail::put<std::uint64_t>(out, ck.state.step);
    put_doubles(out, ck.state.m);
    put_doubles(out, ck.state.v);
    detail::put<std::int32_t>(out, ck.table.k);
    detail::put<std::uint8_t>(out, ck.table.truncated ? 1 : 0);
    detail::put<std::uint64_t>(out, ck.table.index.size());
    for (auto i : ck.table.index) detail::put(out, i);
    for (double d : ck.table.distance) detail::put(out, d);
    if (!out) throw IoError("checkpoint: write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw IoError("checkpoint: cannot move " + tmp + " to " + path);
  }
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot open " + path);
  detail::expect_magic(in, "GFCK", "checkpoint");
  const auto version = detail::get<std::uint32_t>(in);
  if (version != kCheckpointVersion) throw IoError("checkpoint: unsupported version");
  Checkpoint ck;
  ck.config_hash = detail::get<std::uint64_t>(in);
  ck.iteration = int(detail::get<std::int64_t>(in));
  ck.scene.surfels = read_surfels_binary(in);
  if (detail::get<std::uint8_t>(in)) {
    const int degree = int(detail::get<std::uint32_t>(in));
    const int hidden = int(detail::get<std::uint32_t>(in));
    ShadingNet net(degree, hidden);
    const auto params = get_doubles(in);
    if (params.size() != net.parameter_count()) throw IoError("checkpoint: net size mismatch");
    std::copy(params.begin(), params.end(), net.parameters().begin());
    ck.scene.net = std::move(net);
  }
  ck.state.step = detail::get<std::uint64_t>(in);
  ck.state.m = get_doubles(in);
  ck.state.v = get_doubles(in);
  ck.table.k = detail::get<std::int32_t>(in);
  ck.table.truncated = detail::get<std::uint8_t>(in) != 0;
  const auto entries = detail::get<std::uint64_t>(in);
  if (entries > (1ull << 34)) throw IoError("checkpoint: table length out of range");
  ck.table.index.resize(entries);
  ck.table.distance.resize(entries);
  for (auto& i : ck.table.index) i = detail::get<std::uint32_t>(in);
  for (auto& d : ck.table.distance) d = detail::get<double>(in);
  return ck;
}

}  // namespace gfs
