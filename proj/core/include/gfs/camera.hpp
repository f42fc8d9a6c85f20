#pragma once

#include <optional>

#include "gfs/geometry.hpp"
#include "gfs/surfel.hpp"

namespace gfs {

/// Pinhole camera. Camera frame: +x right, +y down, +z forward. `rotation`
/// maps camera-frame directions to world; `translation` is the camera center
/// in world coordinates.
struct Camera {
  double fx = 100.0;
  double fy = 100.0;
  double cx = 50.0;
  double cy = 50.0;
  int width = 100;
  int height = 100;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  double near_clip = 0.01;

  /// Throws ConfigError for non-positive focal lengths or image size, or a
  /// rotation that is not orthonormal to 1e-9.
  void validate() const;

  const Vec3& origin() const { return translation; }
  Vec3 forward() const { return rotation.col(2); }

  /// Unit world-space direction through image point (px, py).
  Vec3 direction_at(double px, double py) const;

  /// Ray through the center of pixel (x, y).
  Ray pixel_ray(int x, int y) const;

  Vec3 to_camera(const Vec3& world) const { return rotation.transpose() * (world - translation); }

  /// Image coordinates of a world point in front of the camera.
  std::optional<Vec2> project(const Vec3& world) const;

  /// Camera at `eye` looking at `target`; `up` is the approximate world up.
  static Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, int width, int height,
                        double fov_y_degrees, double near_clip = 0.01);
};

}  // namespace gfs
