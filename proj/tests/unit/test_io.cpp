#include <cstdio>
#include <fstream>

#include <gtest/gtest.h>

#include "gfs/errors.hpp"
#include "gfs/fusion.hpp"
#include "gfs/image.hpp"
#include "gfs/shading.hpp"
#include "test_support.hpp"

namespace gfs {
namespace {

Image gradient_image(int w, int h, int c) {
  Image img(w, h, c);
  for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = double(i % 256) / 255.0;
  return img;
}

Mesh tetra() {
  Mesh m;
  m.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1.25)};
  m.triangles = {{0, 2, 1}, {0, 1, 3}, {1, 2, 3}, {0, 3, 2}};
  return m;
}

void expect_mesh_near(const Mesh& a, const Mesh& b, double tol) {
  ASSERT_EQ(a.vertices.size(), b.vertices.size());
  ASSERT_EQ(a.triangles, b.triangles);
  for (std::size_t i = 0; i < a.vertices.size(); ++i) EXPECT_LE((a.vertices[i] - b.vertices[i]).norm(), tol);
}

TEST(ImageIo, PngAndPpmRoundTrip) {
  const auto dir = test::temp_dir("imgio");
  for (int c : {1, 3}) {
    const Image img = gradient_image(13, 7, c);
    write_png((dir / "a.png").string(), img);
    const Image back = read_png((dir / "a.png").string());
    ASSERT_TRUE(back.same_shape(img));
    for (std::size_t i = 0; i < img.data.size(); ++i) EXPECT_NEAR(back.data[i], img.data[i], 1e-12);
  }
  const Image rgb = gradient_image(5, 4, 3);
  write_ppm((dir / "a.ppm").string(), rgb);
  const Image back = read_ppm((dir / "a.ppm").string());
  ASSERT_TRUE(back.same_shape(rgb));
  for (std::size_t i = 0; i < rgb.data.size(); ++i) EXPECT_NEAR(back.data[i], rgb.data[i], 1e-12);
  EXPECT_THROW(read_png((dir / "absent.png").string()), IoError);
}

TEST(ImageIo, FloatGridRoundTripAndMagic) {
  const auto dir = test::temp_dir("gridio");
  Image img(6, 3, 2);
  for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = 0.1 * double(i) - 0.5;
  const std::string path = (dir / "g.gfd").string();
  write_float_grid(path, img);
  const Image back = read_float_grid(path);
  ASSERT_TRUE(back.same_shape(img));
  for (std::size_t i = 0; i < img.data.size(); ++i) EXPECT_EQ(back.data[i], double(float(img.data[i])));
  std::ofstream((dir / "bad.gfd").string(), std::ios::binary) << "XXXX0000000000000000";
  EXPECT_THROW(read_float_grid((dir / "bad.gfd").string()), IoError);
}

TEST(MeshIo, PlyAsciiBinaryAndObj) {
  const auto dir = test::temp_dir("meshio");
  const Mesh m = tetra();
  write_ply((dir / "b.ply").string(), m, true);
  expect_mesh_near(read_mesh((dir / "b.ply").string()), m, 1e-6);
  write_ply((dir / "a.ply").string(), m, false);
  expect_mesh_near(read_mesh((dir / "a.ply").string()), m, 1e-6);
  write_obj((dir / "m.obj").string(), m);
  expect_mesh_near(read_mesh((dir / "m.obj").string()), m, 1e-6);
  std::ofstream((dir / "x.ply").string()) << "not a mesh\n";
  EXPECT_THROW(read_mesh((dir / "x.ply").string()), IoError);
  EXPECT_NEAR(m.area(), tetra().area(), 0.0);
  const MeshReport r = inspect_mesh(m);
  EXPECT_EQ(r.boundary_edges, 0u);
}

TEST(SurfelIo, BinaryAndTextRoundTrip) {
  const auto dir = test::temp_dir("surfelio");
  SurfelSet s = test::random_surfels(17, 5);
  s[3].color = LatentColor{};
  for (double& x : attr_values(s[3].color)) x = 0.25;
  s[4].color = LatentColor{};
  SurfelSet uniform(s.begin(), s.begin() + 3);
  for (bool dbl : {true, false}) {
    const std::string path = (dir / "s.gfss").string();
    write_surfels_binary(path, uniform, dbl);
    const auto back = read_surfels_binary(path);
    ASSERT_EQ(back.size(), uniform.size());
    const double tol = dbl ? 0.0 : 1e-6;
    for (std::size_t i = 0; i < back.size(); ++i) {
      EXPECT_LE((back[i].center - uniform[i].center).norm(), tol);
      EXPECT_NEAR(back[i].weight, uniform[i].weight, tol * 10);
      EXPECT_EQ(back[i].id, uniform[i].id);
    }
  }
  write_surfels_text((dir / "s.json").string(), uniform);
  const auto text = read_surfels_text((dir / "s.json").string());
  ASSERT_EQ(text.size(), uniform.size());
  for (std::size_t i = 0; i < text.size(); ++i) EXPECT_EQ(text[i].center, uniform[i].center);
  EXPECT_THROW(write_surfels_binary((dir / "mixed.gfss").string(), s), ContractViolation);
}

}  // namespace
}  // namespace gfs
