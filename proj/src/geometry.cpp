#include "cotmap/geometry.hpp"

#include <cmath>

namespace cotmap {

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw std::invalid_argument("camera focal lengths must be positive");
  if (width <= 0 || height <= 0) throw std::invalid_argument("camera image size must be positive");
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height))
    throw std::invalid_argument("camera principal point must lie inside the image");
}

Pose Pose::from_xyz_yaw(double x, double y, double z, double yaw) {
  Pose p;
  p.translation = Vec3(x, y, z);
  p.rotation = Quat(Eigen::AngleAxisd(yaw, Vec3::UnitZ()));
  return p;
}

bool Pose::is_valid(double tol) const {
  return std::abs(rotation.norm() - 1.0) <= tol && translation.allFinite();
}

Pose Pose::inverse() const {
  Pose inv;
  inv.rotation = rotation.conjugate();
  inv.translation = -(inv.rotation * translation);
  return inv;
}

Pose Pose::operator*(const Pose& rhs) const {
  Pose out;
  out.rotation = rotation * rhs.rotation;
  out.translation = translation + rotation * rhs.translation;
  return out;
}

double Pose::yaw() const {
  const Vec3 fwd = rotation * Vec3::UnitX();
  return std::atan2(fwd.y(), fwd.x());
}

Vec2 project_point(const Vec3& p, const CameraIntrinsics& k) {
  if (!(p.z() > 0.0)) throw PointBehindCamera();
  return {k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy};
}

Vec3 unproject_pixel(const PixelDepth& pd, const CameraIntrinsics& k) {
  if (!(pd.depth > 0.0)) throw std::invalid_argument("unproject_pixel: depth must be positive");
  return pixel_ray(pd.u, pd.v, k) * pd.depth;
}

Vec3 transform_point(const Vec3& p, const Pose& pose) {
  return pose.rotation * p + pose.translation;
}

double rotation_angle_between(const Pose& a, const Pose& b) {
  return a.rotation.angularDistance(b.rotation);
}

Pose camera_mount(double height, double pitch_rad, double forward_offset) {
  // Columns are the camera axes expressed in the body frame.
  const double c = std::cos(pitch_rad);
  const double s = std::sin(pitch_rad);
  Eigen::Matrix3d r;
  r.col(0) = Vec3(0.0, -1.0, 0.0);
  r.col(1) = Vec3(-s, 0.0, -c);
  r.col(2) = Vec3(c, 0.0, -s);
  Pose mount;
  mount.rotation = Quat(r).normalized();
  mount.translation = Vec3(forward_offset, 0.0, height);
  return mount;
}

}  // namespace cotmap
