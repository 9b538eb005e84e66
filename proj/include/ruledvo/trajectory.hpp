#pragma once

// Closed-form camera motions used by the simulator. Positions are in the
// world frame, which coincides with the camera frame at t = 0 (z forward).

#include <string>
#include <vector>

#include "ruledvo/types.hpp"

namespace ruledvo {

enum class TrajectoryKind {
  kStatic,
  kLinearParallel,        // x = A sin(wt)
  kLinearPerpendicular,   // z = A sin(wt)
  kCircularParallel,      // circle in the x-y plane
  kCircularPerpendicular, // circle in the x-z plane
  kCircularTilted,        // x-y circle tilted 45 degrees about x
  kZigzag,                // triangle wave in x with blended corners
  kSquare,                // x, y, -x, -y legs with stops at the corners
  kWaypoints,             // minimum-jerk segments through timed points
};

std::string to_string(TrajectoryKind kind);
// Throws InvalidArgument for unknown names.
TrajectoryKind trajectory_kind_from_string(const std::string& name);

struct Waypoint {
  double t = 0.0;
  Vec3 position = Vec3::Zero();
};

struct TrajectorySpec {
  TrajectoryKind kind = TrajectoryKind::kLinearParallel;
  double amplitude = 0.2;     // m; side length for the square
  double period = 4.0;        // s; one full loop for the square
  double corner_blend = 0.2;  // s, zigzag corner rounding
  double dwell = 0.25;        // s, square stop at each corner
  std::vector<Waypoint> waypoints;
};

struct MotionSample {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Vec3 acceleration = Vec3::Zero();
};

// Evaluates the trajectory; the position at t = 0 is the origin.
MotionSample sample_trajectory(const TrajectorySpec& spec, double t);

enum class RotationAxis { kNone, kX, kY, kZ };

std::string to_string(RotationAxis axis);
RotationAxis rotation_axis_from_string(const std::string& name);

// Rotation about one camera axis. With period <= 0 the rate is constant;
// otherwise the angle is (rate P / 2 pi) sin(2 pi t / P), so the peak
// angular rate is `rate`.
struct RotationSpec {
  RotationAxis axis = RotationAxis::kNone;
  double rate = 0.0;  // rad/s
  double period = 0.0;
};

struct AttitudeSample {
  Quat world_from_cam = Quat::Identity();
  Vec3 angular_velocity = Vec3::Zero();  // camera frame, rad/s
};

AttitudeSample sample_attitude(const RotationSpec& spec, double t);

}  // namespace ruledvo
