#pragma once

#include <string>
#include <vector>

namespace gfs {

/// Interleaved floating-point image, row-major.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<double> data;

  Image() = default;
  Image(int w, int h, int c, double fill = 0.0)
      : width(w), height(h), channels(c), data(std::size_t(w) * h * c, fill) {}

  double& at(int x, int y, int c = 0) { return data[(std::size_t(y) * width + x) * channels + c]; }
  double at(int x, int y, int c = 0) const {
    return data[(std::size_t(y) * width + x) * channels + c];
  }
  std::size_t pixels() const { return std::size_t(width) * height; }
  bool same_shape(const Image& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }
};

/// Rounds to 8-bit levels in place.
void quantize_8bit(Image& img);

/// 8-bit PNG (gray, RGB). Values are clamped to [0, 1].
void write_png(const std::string& path, const Image& img);
Image read_png(const std::string& path);

/// ASCII PPM (P3).
void write_ppm(const std::string& path, const Image& img);
Image read_ppm(const std::string& path);

// Float grid file for depth / normal / transmittance maps:
//   char[4] "GFDM" | u32 width | u32 height | u32 channels | f32 data[w*h*c]
// little-endian throughout.
void write_float_grid(const std::string& path, const Image& img);
Image read_float_grid(const std::string& path);

}  // namespace gfs
