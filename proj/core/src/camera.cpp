#include "gfs/camera.hpp"

#include <cmath>
#include <numbers>

#include "gfs/errors.hpp"

namespace gfs {

void Camera::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw ConfigError("camera: focal lengths must be positive");
  if (width <= 0 || height <= 0) throw ConfigError("camera: image size must be positive");
  if ((rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9) {
    throw ConfigError("camera: rotation is not orthonormal");
  }
  if (!(near_clip >= 0.0)) throw ConfigError("camera: near clip must be non-negative");
}

Vec3 Camera::direction_at(double px, double py) const {
  const Vec3 d((px - cx) / fx, (py - cy) / fy, 1.0);
  return (rotation * d).normalized();
}

Ray Camera::pixel_ray(int x, int y) const {
  return Ray{translation, direction_at(x + 0.5, y + 0.5)};
}

std::optional<Vec2> Camera::project(const Vec3& world) const {
  const Vec3 p = to_camera(world);
  if (p.z() <= near_clip) return std::nullopt;
  return Vec2(fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy);
}

Camera Camera::look_at(const Vec3& eye, const Vec3& target, const Vec3& up, int width, int height,
                       double fov_y_degrees, double near_clip) {
  const Vec3 forward = (target - eye).normalized();
  Vec3 right = forward.cross(up);
  if (right.norm() < 1e-12) right = any_orthogonal(forward);
  right.normalize();
  const Vec3 down = forward.cross(right);

  Camera cam;
  cam.width = width;
  cam.height = height;
  cam.rotation.col(0) = right;
  cam.rotation.col(1) = down;
  cam.rotation.col(2) = forward;
  cam.translation = eye;
  cam.fy = 0.5 * height / std::tan(0.5 * fov_y_degrees * std::numbers::pi / 180.0);
  cam.fx = cam.fy;
  cam.cx = 0.5 * width;
  cam.cy = 0.5 * height;
  cam.near_clip = near_clip;
  return cam;
}

}  // namespace gfs
