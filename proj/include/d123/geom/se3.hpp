#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <span>
#include <vector>

namespace d123 {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

/// Rigid-body transform: rotation (unit quaternion, stored w,x,y,z) followed
/// by translation in meters. Frames follow ISO 8855 (x forward, y left, z up)
/// for body and box poses.
class SE3 {
 public:
  SE3() : translation_(Vec3::Zero()), rotation_(Eigen::Quaterniond::Identity()) {}

  /// Normalizes the quaternion. Throws CorruptData when its norm is more
  /// than 1e-3 away from one.
  SE3(const Vec3& translation, const Eigen::Quaterniond& rotation);

  static SE3 from_wxyz(const Vec3& translation, double w, double x, double y, double z);
  static SE3 from_translation(double x, double y, double z);
  static SE3 from_yaw(double yaw, const Vec3& translation = Vec3::Zero());
  static SE3 from_matrix(const Eigen::Matrix4d& m);

  const Vec3& translation() const { return translation_; }
  const Eigen::Quaterniond& rotation() const { return rotation_; }
  Eigen::Matrix3d rotation_matrix() const { return rotation_.toRotationMatrix(); }
  Eigen::Matrix4d matrix() const;

  /// Heading about +z, in (-pi, pi].
  double yaw() const;

  SE3 inverse() const;
  Vec3 apply(const Vec3& p) const { return rotation_ * p + translation_; }

  /// Bitwise field equality.
  bool operator==(const SE3& other) const;

 private:
  Vec3 translation_;
  Eigen::Quaterniond rotation_;
};

/// Applies b first, then a.
SE3 compose(const SE3& a, const SE3& b);
inline SE3 operator*(const SE3& a, const SE3& b) { return compose(a, b); }

std::vector<Vec3> transform_points(const SE3& pose, std::span<const Vec3> points);

/// Angle of the relative rotation between two poses, radians in [0, pi].
double rotation_angle_between(const SE3& a, const SE3& b);

}  // namespace d123
