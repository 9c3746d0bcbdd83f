#include "d123/geom/vehicle.hpp"

#include <string>

#include "d123/error.hpp"

namespace d123 {

namespace {

// Body-frame position of each anchor relative to the rear axle.
Vec3 origin_offset(const VehicleParameters& params, PoseOrigin origin) {
  switch (origin) {
    case PoseOrigin::rear_axle:
      return Vec3::Zero();
    case PoseOrigin::center:
    case PoseOrigin::ground_plane:
      return Vec3(center_offset(params), 0.0, 0.0);
    case PoseOrigin::imu:
      if (!params.imu_to_rear_axle) {
        throw Error(ErrorCode::unknown_origin, "imu pose origin requires an imu_to_rear_axle calibration offset");
      }
      return *params.imu_to_rear_axle;
  }
  throw Error(ErrorCode::unknown_origin, "unresolvable pose origin");
}

Vec3 reference_offset(const VehicleParameters& params, ReferencePoint point) {
  return point == ReferencePoint::rear_axle ? Vec3::Zero() : Vec3(center_offset(params), 0.0, 0.0);
}

}  // namespace

std::string_view to_string(PoseOrigin origin) {
  switch (origin) {
    case PoseOrigin::rear_axle: return "rear_axle";
    case PoseOrigin::center: return "center";
    case PoseOrigin::ground_plane: return "ground_plane";
    case PoseOrigin::imu: return "imu";
  }
  return "rear_axle";
}

PoseOrigin pose_origin_from_string(std::string_view name) {
  if (name == "rear_axle") return PoseOrigin::rear_axle;
  if (name == "center") return PoseOrigin::center;
  if (name == "ground_plane") return PoseOrigin::ground_plane;
  if (name == "imu") return PoseOrigin::imu;
  throw Error(ErrorCode::unknown_origin, "unknown pose origin '" + std::string(name) + "'");
}

void VehicleParameters::validate() const {
  if (!(length > 0.0 && width > 0.0 && height > 0.0 && wheelbase > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "vehicle dimensions must be positive");
  }
  if (rear_axle_to_center && !(*rear_axle_to_center < length)) {
    throw Error(ErrorCode::invalid_argument, "rear_axle_to_center must be shorter than the vehicle length");
  }
}

double center_offset(const VehicleParameters& params) {
  if (params.rear_axle_to_center) {
    return *params.rear_axle_to_center;
  }
  if (params.infer_center_from_length) {
    return params.length / 2.0 - kDefaultRearOverhang;
  }
  throw Error(ErrorCode::unknown_origin, "rear_axle_to_center is not set and inference is disabled");
}

SE3 pose_at_reference(const SE3& state_pose, const VehicleParameters& params, ReferencePoint target) {
  const Vec3 shift = reference_offset(params, target) - origin_offset(params, params.pose_origin);
  if (shift.isZero(0.0)) {
    return state_pose;
  }
  return SE3(state_pose.apply(shift), state_pose.rotation());
}

SE3 convert_reference(const SE3& pose, const VehicleParameters& params, ReferencePoint from, ReferencePoint to) {
  const Vec3 shift = reference_offset(params, to) - reference_offset(params, from);
  if (shift.isZero(0.0)) {
    return pose;
  }
  return SE3(pose.apply(shift), pose.rotation());
}

}  // namespace d123
