#include "d123/geom/se3.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "d123/error.hpp"

namespace d123 {

namespace {

constexpr double kCorruptNormTolerance = 1e-3;

// Leaves already-unit quaternions untouched so stored values round-trip
// bit-exactly through construction.
Eigen::Quaterniond normalized(const Eigen::Quaterniond& q) {
  const double norm = q.norm();
  if (!std::isfinite(norm) || std::abs(norm - 1.0) > kCorruptNormTolerance) {
    throw Error(ErrorCode::corrupt_data, "quaternion norm " + std::to_string(norm) + " is not unit");
  }
  if (std::abs(norm - 1.0) <= 4 * std::numeric_limits<double>::epsilon()) {
    return q;
  }
  return Eigen::Quaterniond(q.coeffs() / norm);
}

}  // namespace

SE3::SE3(const Vec3& translation, const Eigen::Quaterniond& rotation)
    : translation_(translation), rotation_(normalized(rotation)) {
  if (!translation_.allFinite()) {
    throw Error(ErrorCode::corrupt_data, "non-finite translation");
  }
}

SE3 SE3::from_wxyz(const Vec3& translation, double w, double x, double y, double z) {
  return SE3(translation, Eigen::Quaterniond(w, x, y, z));
}

SE3 SE3::from_translation(double x, double y, double z) {
  return SE3(Vec3(x, y, z), Eigen::Quaterniond::Identity());
}

SE3 SE3::from_yaw(double yaw, const Vec3& translation) {
  return SE3(translation, Eigen::Quaterniond(Eigen::AngleAxisd(yaw, Vec3::UnitZ())));
}

SE3 SE3::from_matrix(const Eigen::Matrix4d& m) {
  Eigen::Matrix3d r = m.block<3, 3>(0, 0);
  return SE3(m.block<3, 1>(0, 3), Eigen::Quaterniond(r).normalized());
}

Eigen::Matrix4d SE3::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.block<3, 3>(0, 0) = rotation_matrix();
  m.block<3, 1>(0, 3) = translation_;
  return m;
}

double SE3::yaw() const {
  const auto& q = rotation_;
  return std::atan2(2.0 * (q.w() * q.z() + q.x() * q.y()), 1.0 - 2.0 * (q.y() * q.y() + q.z() * q.z()));
}

SE3 SE3::inverse() const {
  const Eigen::Quaterniond inv = rotation_.conjugate();
  return SE3(-(inv * translation_), inv);
}

bool SE3::operator==(const SE3& other) const {
  return translation_ == other.translation_ && rotation_.coeffs() == other.rotation_.coeffs();
}

SE3 compose(const SE3& a, const SE3& b) {
  const Eigen::Quaterniond q = a.rotation() * b.rotation();
  return SE3(a.apply(b.translation()), q.normalized());
}

std::vector<Vec3> transform_points(const SE3& pose, std::span<const Vec3> points) {
  std::vector<Vec3> out;
  out.reserve(points.size());
  const Eigen::Matrix3d r = pose.rotation_matrix();
  for (const auto& p : points) {
    out.emplace_back(r * p + pose.translation());
  }
  return out;
}

double rotation_angle_between(const SE3& a, const SE3& b) {
  return a.rotation().angularDistance(b.rotation());
}

}  // namespace d123
