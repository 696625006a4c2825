#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <stdexcept>

namespace cotmap {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Quat = Eigen::Quaterniond;

/// Pinhole intrinsics. Camera frame is +z forward, +x right, +y down, so the
/// depth of a camera-frame point is its z coordinate.
struct CameraIntrinsics {
  double fx = 60.0;
  double fy = 60.0;
  double cx = 48.0;
  double cy = 32.0;
  int width = 96;
  int height = 64;

  /// Throws std::invalid_argument when fx, fy, cx, cy or the size are out of range.
  void validate() const;
  int pixel_count() const { return width * height; }
};

/// Rigid transform, world-from-body (or world-from-camera for camera poses).
struct Pose {
  Vec3 translation = Vec3::Zero();
  Quat rotation = Quat::Identity();

  static Pose from_xyz_yaw(double x, double y, double z, double yaw);
  bool is_valid(double tol = 1e-9) const;
  Pose inverse() const;
  Pose operator*(const Pose& rhs) const;
  /// Heading of the body x axis in the world xy plane.
  double yaw() const;
};

struct PixelDepth {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;
};

/// Thrown by project_point for points on or behind the image plane.
class PointBehindCamera : public std::domain_error {
 public:
  PointBehindCamera() : std::domain_error("point is behind the camera (z <= 0)") {}
};

Vec2 project_point(const Vec3& p, const CameraIntrinsics& k);
Vec3 unproject_pixel(const PixelDepth& pd, const CameraIntrinsics& k);
Vec3 transform_point(const Vec3& p, const Pose& pose);

/// Unit ray direction scaled so that its z component is 1 (pixel coordinates are real).
inline Vec3 pixel_ray(double u, double v, const CameraIntrinsics& k) {
  return {(u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0};
}

/// Angle of the relative rotation between two poses, in radians.
double rotation_angle_between(const Pose& a, const Pose& b);

/// Fixed mounting of a forward-looking camera on a robot body (x forward, y left, z up),
/// pitched down by `pitch_rad` and raised by `height` meters.
Pose camera_mount(double height, double pitch_rad, double forward_offset = 0.0);

}  // namespace cotmap
