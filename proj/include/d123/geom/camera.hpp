#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "d123/geom/se3.hpp"

namespace d123 {

enum class CameraProjection { pinhole, pinhole_brown_conrady, fisheye_equidistant };

std::string_view to_string(CameraProjection model);
CameraProjection camera_projection_from_string(std::string_view name);

/// Intrinsics plus camera-in-body extrinsic. The camera frame is the OpenCV
/// one: x right, y down, z forward.
struct CameraModel {
  CameraProjection model = CameraProjection::pinhole;
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  // (k1, k2, p1, p2, k3) for Brown-Conrady, (k1, k2, k3, k4) for fisheye.
  std::vector<double> distortion;
  std::int32_t width = 0;
  std::int32_t height = 0;
  SE3 extrinsic;

  /// Throws InvalidArgument on non-positive focal lengths or image size, or
  /// a distortion vector of the wrong length for the model.
  void validate() const;

  bool operator==(const CameraModel&) const = default;
};

/// Rotation taking camera (right, down, forward) axes into body (forward,
/// left, up) axes: camera z maps to body x, camera x to body -y.
Eigen::Quaterniond camera_convention_rotation();

/// Extrinsic of a camera at `position` (body frame) looking along body yaw
/// `yaw` with the optical axis horizontal.
SE3 camera_extrinsic_looking(const Vec3& position, double yaw);

Vec3 body_point_in_camera(const Vec3& point_body, const CameraModel& camera);

struct Projection {
  std::vector<Vec2> pixels;
  std::vector<bool> valid;
};

/// Projects camera-frame points. Points with z <= 1e-6 are flagged invalid
/// and their pixel is left at zero.
Projection project(const CameraModel& camera, std::span<const Vec3> points_camera);

/// Inverse of project at a known depth (z). Distorted models are undistorted
/// by fixed-point iteration.
Vec3 unproject(const CameraModel& camera, const Vec2& pixel, double depth);

}  // namespace d123
