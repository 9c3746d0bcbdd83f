#pragma once

#include <optional>
#include <string_view>

#include "d123/geom/se3.hpp"

namespace d123 {

enum class PoseOrigin { rear_axle, center, ground_plane, imu };
enum class ReferencePoint { rear_axle, center };

std::string_view to_string(PoseOrigin origin);
PoseOrigin pose_origin_from_string(std::string_view name);

/// Rear overhang assumed when the center offset has to be inferred from the
/// vehicle length (see VehicleParameters::infer_center_from_length).
inline constexpr double kDefaultRearOverhang = 1.0;

struct VehicleParameters {
  double length = 4.5;
  double width = 1.9;
  double height = 1.6;
  double wheelbase = 2.8;
  // Longitudinal offset from rear axle to vehicle center, forward positive.
  std::optional<double> rear_axle_to_center;
  // When set and rear_axle_to_center is absent, the offset becomes
  // length / 2 - kDefaultRearOverhang.
  bool infer_center_from_length = false;
  PoseOrigin pose_origin = PoseOrigin::rear_axle;
  // IMU position relative to the rear axle in the body frame; required when
  // pose_origin is imu.
  std::optional<Vec3> imu_to_rear_axle;

  void validate() const;
  bool operator==(const VehicleParameters&) const = default;
};

/// Resolved rear-axle to center offset. Throws UnknownOrigin when it is
/// neither given nor inferable.
double center_offset(const VehicleParameters& params);

/// Re-anchors a pose expressed at params.pose_origin to the requested
/// reference point. Rotation is unchanged.
SE3 pose_at_reference(const SE3& state_pose, const VehicleParameters& params, ReferencePoint target);

/// Converts a pose anchored at `from` into one anchored at `to`.
SE3 convert_reference(const SE3& pose, const VehicleParameters& params, ReferencePoint from, ReferencePoint to);

}  // namespace d123
