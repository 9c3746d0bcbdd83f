#include "d123/geom/camera.hpp"

#include <cmath>
#include <string>

#include "d123/error.hpp"

namespace d123 {

namespace {

constexpr double kMinDepth = 1e-6;

struct Normalized {
  double x;
  double y;
};

Normalized distort_brown_conrady(const std::vector<double>& d, double x, double y) {
  const double k1 = d[0], k2 = d[1], p1 = d[2], p2 = d[3], k3 = d[4];
  const double r2 = x * x + y * y;
  const double radial = 1.0 + k1 * r2 + k2 * r2 * r2 + k3 * r2 * r2 * r2;
  const double xd = x * radial + 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x);
  const double yd = y * radial + p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y;
  return {xd, yd};
}

Normalized distort_fisheye(const std::vector<double>& d, double x, double y) {
  const double r = std::sqrt(x * x + y * y);
  if (r == 0.0) {
    return {x, y};
  }
  const double theta = std::atan(r);
  const double t2 = theta * theta;
  const double theta_d = theta * (1.0 + d[0] * t2 + d[1] * t2 * t2 + d[2] * t2 * t2 * t2 + d[3] * t2 * t2 * t2 * t2);
  const double scale = theta_d / r;
  return {x * scale, y * scale};
}

Normalized distort(const CameraModel& camera, double x, double y) {
  switch (camera.model) {
    case CameraProjection::pinhole:
      return {x, y};
    case CameraProjection::pinhole_brown_conrady:
      return distort_brown_conrady(camera.distortion, x, y);
    case CameraProjection::fisheye_equidistant:
      return distort_fisheye(camera.distortion, x, y);
  }
  return {x, y};
}

}  // namespace

std::string_view to_string(CameraProjection model) {
  switch (model) {
    case CameraProjection::pinhole: return "pinhole";
    case CameraProjection::pinhole_brown_conrady: return "pinhole_brown_conrady";
    case CameraProjection::fisheye_equidistant: return "fisheye_equidistant";
  }
  return "pinhole";
}

CameraProjection camera_projection_from_string(std::string_view name) {
  if (name == "pinhole") return CameraProjection::pinhole;
  if (name == "pinhole_brown_conrady") return CameraProjection::pinhole_brown_conrady;
  if (name == "fisheye_equidistant") return CameraProjection::fisheye_equidistant;
  throw Error(ErrorCode::invalid_argument, "unknown camera model '" + std::string(name) + "'");
}

void CameraModel::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "camera focal lengths must be positive");
  }
  if (width <= 0 || height <= 0) {
    throw Error(ErrorCode::invalid_argument, "camera image size must be positive");
  }
  const std::size_t expected = model == CameraProjection::pinhole_brown_conrady ? 5
                               : model == CameraProjection::fisheye_equidistant ? 4
                                                                                : distortion.size();
  if (model == CameraProjection::pinhole && !distortion.empty() && distortion.size() != 5) {
    throw Error(ErrorCode::invalid_argument, "pinhole distortion must be empty or 5 coefficients");
  }
  if (distortion.size() != expected) {
    throw Error(ErrorCode::invalid_argument, std::string(to_string(model)) + " expects " +
                                                 std::to_string(expected) + " distortion coefficients");
  }
}

Eigen::Quaterniond camera_convention_rotation() {
  Eigen::Matrix3d r;
  // Columns are camera x, y, z expressed in body coordinates.
  r << 0.0, 0.0, 1.0,
      -1.0, 0.0, 0.0,
      0.0, -1.0, 0.0;
  return Eigen::Quaterniond(r);
}

SE3 camera_extrinsic_looking(const Vec3& position, double yaw) {
  const Eigen::Quaterniond q = Eigen::Quaterniond(Eigen::AngleAxisd(yaw, Vec3::UnitZ())) * camera_convention_rotation();
  return SE3(position, q.normalized());
}

Vec3 body_point_in_camera(const Vec3& point_body, const CameraModel& camera) {
  return camera.extrinsic.inverse().apply(point_body);
}

Projection project(const CameraModel& camera, std::span<const Vec3> points_camera) {
  Projection out;
  out.pixels.assign(points_camera.size(), Vec2::Zero());
  out.valid.assign(points_camera.size(), false);
  for (std::size_t i = 0; i < points_camera.size(); ++i) {
    const Vec3& p = points_camera[i];
    if (!(p.z() > kMinDepth)) {
      continue;
    }
    const Normalized n = distort(camera, p.x() / p.z(), p.y() / p.z());
    out.pixels[i] = Vec2(camera.fx * n.x + camera.cx, camera.fy * n.y + camera.cy);
    out.valid[i] = true;
  }
  return out;
}

Vec3 unproject(const CameraModel& camera, const Vec2& pixel, double depth) {
  const double xd = (pixel.x() - camera.cx) / camera.fx;
  const double yd = (pixel.y() - camera.cy) / camera.fy;
  double x = xd;
  double y = yd;
  if (camera.model != CameraProjection::pinhole) {
    for (int iter = 0; iter < 50; ++iter) {
      const Normalized d = distort(camera, x, y);
      x += xd - d.x;
      y += yd - d.y;
    }
  }
  return Vec3(x * depth, y * depth, depth);
}

}  // namespace d123
