#include "gfs/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>

#include "binary_io.hpp"

namespace gfs {

namespace {

constexpr char kGridMagic[5] = "GFDM";

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

void quantize_8bit(Image& img) {
  for (double& v : img.data) v = to_byte(v) / 255.0;
}

void write_png(const std::string& path, const Image& img) {
  if (img.channels != 1 && img.channels != 3) throw IoError("png: only 1 or 3 channels");
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot open " + path + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("png: allocation failed");
  }
  std::vector<std::uint8_t> row(std::size_t(img.width) * img.channels);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("png: write failed for " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, img.width, img.height, 8,
               img.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < img.channels; ++c) row[std::size_t(x) * img.channels + c] = to_byte(img.at(x, y, c));
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image read_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("png: allocation failed");
  }
  Image img;
  std::vector<std::uint8_t> row;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("png: read failed for " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  png_read_update_info(png, info);
  const int channels = png_get_channels(png, info);
  img = Image(int(png_get_image_width(png, info)), int(png_get_image_height(png, info)), channels);
  row.resize(png_get_rowbytes(png, info));
  for (int y = 0; y < img.height; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < channels; ++c) img.at(x, y, c) = row[std::size_t(x) * channels + c] / 255.0;
    }
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

void write_ppm(const std::string& path, const Image& img) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "P3\n" << img.width << ' ' << img.height << "\n255\n";
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        const double v = img.channels == 1 ? img.at(x, y, 0) : img.at(x, y, c);
        out << int(to_byte(v)) << (c == 2 ? '\n' : ' ');
      }
    }
  }
  if (!out) throw IoError("ppm: write failed for " + path);
}

Image read_ppm(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P3" || w <= 0 || h <= 0 || maxval <= 0) throw IoError(path + ": not an ASCII PPM");
  Image img(w, h, 3);
  for (double& v : img.data) {
    int b = 0;
    if (!(in >> b)) throw IoError(path + ": truncated PPM");
    v = double(b) / maxval;
  }
  return img;
}

void write_float_grid(const std::string& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  detail::put_magic(out, kGridMagic);
  detail::put<std::uint32_t>(out, img.width);
  detail::put<std::uint32_t>(out, img.height);
  detail::put<std::uint32_t>(out, img.channels);
  for (double v : img.data) detail::put<float>(out, static_cast<float>(v));
  if (!out) throw IoError("float grid: write failed for " + path);
}

Image read_float_grid(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  detail::expect_magic(in, kGridMagic, path);
  const auto w = detail::get<std::uint32_t>(in);
  const auto h = detail::get<std::uint32_t>(in);
  const auto c = detail::get<std::uint32_t>(in);
  if (w == 0 || h == 0 || c == 0 || std::uint64_t(w) * h * c > (1ull << 30)) {
    throw IoError(path + ": implausible grid dimensions");
  }
  Image img(static_cast<int>(w), static_cast<int>(h), static_cast<int>(c));
  for (double& v : img.data) v = detail::get<float>(in);
  return img;
}

}  // namespace gfs
