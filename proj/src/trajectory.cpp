#include "ruledvo/trajectory.hpp"

#include <cmath>
#include <numbers>

#include "ruledvo/errors.hpp"

namespace ruledvo {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

MotionSample along(const Vec3& axis, double s, double ds, double dds) {
  return {s * axis, ds * axis, dds * axis};
}

MotionSample sinusoid(const Vec3& axis, double amplitude, double period, double t) {
  const double w = kTwoPi / period;
  return along(axis, amplitude * std::sin(w * t), amplitude * w * std::cos(w * t),
               -amplitude * w * w * std::sin(w * t));
}

// Circle through the origin in the plane spanned by u (initial direction
// of travel) and v (towards the center).
MotionSample circle(const Vec3& u, const Vec3& v, double amplitude, double period,
                    double t) {
  const double w = kTwoPi / period;
  const double s = std::sin(w * t);
  const double c = std::cos(w * t);
  MotionSample m;
  m.position = amplitude * (s * u + (1.0 - c) * v);
  m.velocity = amplitude * w * (c * u + s * v);
  m.acceleration = amplitude * w * w * (-s * u + c * v);
  return m;
}

MotionSample zigzag(const TrajectorySpec& spec, double t) {
  const double A = spec.amplitude;
  const double T = spec.period;
  const double v = 4.0 * A / T;
  const double blend = spec.corner_blend;

  const double k = std::round((t - 0.25 * T) / (0.5 * T));
  const double t_k = 0.25 * T + k * 0.5 * T;
  const double sigma = std::fmod(std::abs(k), 2.0) == 0.0 ? 1.0 : -1.0;
  if (blend > 0.0 && std::abs(t - t_k) < 0.5 * blend) {
    const double dt = t - t_k;
    return along(Vec3::UnitX(), sigma * (A - 0.25 * v * blend - (v / blend) * dt * dt),
                 -2.0 * sigma * (v / blend) * dt, -2.0 * sigma * v / blend);
  }
  const double u = t / T - std::floor(t / T);
  if (u < 0.25) return along(Vec3::UnitX(), 4.0 * A * u, v, 0.0);
  if (u < 0.75) return along(Vec3::UnitX(), 2.0 * A - 4.0 * A * u, -v, 0.0);
  return along(Vec3::UnitX(), 4.0 * A * u - 4.0 * A, v, 0.0);
}

MotionSample square(const TrajectorySpec& spec, double t) {
  const double side = spec.amplitude;
  const double leg = 0.25 * spec.period;
  const double move = leg - spec.dwell;
  const double ta = 0.25 * move;
  const double vmax = side / (move - ta);
  const double acc = vmax / ta;

  static const Vec3 corners[4] = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(1, 1, 0),
                                  Vec3(0, 1, 0)};
  static const Vec3 dirs[4] = {Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(-1, 0, 0),
                               Vec3(0, -1, 0)};
  const double cycle = t / spec.period - std::floor(t / spec.period);
  const double in_cycle = cycle * spec.period;
  const int index = std::min(3, static_cast<int>(in_cycle / leg));
  const double tau = in_cycle - index * leg - spec.dwell;

  double s = 0.0, ds = 0.0, dds = 0.0;
  if (tau <= 0.0) {
    // dwell at the corner
  } else if (tau < ta) {
    s = 0.5 * acc * tau * tau;
    ds = acc * tau;
    dds = acc;
  } else if (tau < move - ta) {
    s = 0.5 * acc * ta * ta + vmax * (tau - ta);
    ds = vmax;
  } else {
    const double r = move - tau;
    s = side - 0.5 * acc * r * r;
    ds = acc * r;
    dds = -acc;
  }
  MotionSample m = along(dirs[index], s, ds, dds);
  m.position += side * corners[index];
  return m;
}

MotionSample waypoints(const TrajectorySpec& spec, double t) {
  const auto& w = spec.waypoints;
  if (w.empty()) return {};
  if (t <= w.front().t) return {w.front().position, Vec3::Zero(), Vec3::Zero()};
  if (t >= w.back().t) return {w.back().position, Vec3::Zero(), Vec3::Zero()};
  std::size_t i = 1;
  while (w[i].t < t) ++i;
  const double T = w[i].t - w[i - 1].t;
  const double s = (t - w[i - 1].t) / T;
  const Vec3 delta = w[i].position - w[i - 1].position;
  const double s2 = s * s, s3 = s2 * s;
  MotionSample m;
  m.position = w[i - 1].position + delta * (10 * s3 - 15 * s3 * s + 6 * s3 * s2);
  m.velocity = delta / T * (30 * s2 - 60 * s3 + 30 * s3 * s);
  m.acceleration = delta / (T * T) * (60 * s - 180 * s2 + 120 * s3);
  return m;
}

MotionSample raw_sample(const TrajectorySpec& spec, double t) {
  const double A = spec.amplitude;
  const double P = spec.period;
  switch (spec.kind) {
    case TrajectoryKind::kStatic:
      return {};
    case TrajectoryKind::kLinearParallel:
      return sinusoid(Vec3::UnitX(), A, P, t);
    case TrajectoryKind::kLinearPerpendicular:
      return sinusoid(Vec3::UnitZ(), A, P, t);
    case TrajectoryKind::kCircularParallel:
      return circle(Vec3::UnitX(), Vec3::UnitY(), A, P, t);
    case TrajectoryKind::kCircularPerpendicular:
      return circle(Vec3::UnitX(), Vec3::UnitZ(), A, P, t);
    case TrajectoryKind::kCircularTilted:
      return circle(Vec3::UnitX(), Vec3(0.0, std::sqrt(0.5), std::sqrt(0.5)), A, P, t);
    case TrajectoryKind::kZigzag:
      return zigzag(spec, t);
    case TrajectoryKind::kSquare:
      return square(spec, t);
    case TrajectoryKind::kWaypoints:
      return waypoints(spec, t);
  }
  return {};
}

}  // namespace

std::string to_string(TrajectoryKind kind) {
  switch (kind) {
    case TrajectoryKind::kStatic: return "static";
    case TrajectoryKind::kLinearParallel: return "linear_parallel";
    case TrajectoryKind::kLinearPerpendicular: return "linear_perpendicular";
    case TrajectoryKind::kCircularParallel: return "circular_parallel";
    case TrajectoryKind::kCircularPerpendicular: return "circular_perpendicular";
    case TrajectoryKind::kCircularTilted: return "circular_tilted";
    case TrajectoryKind::kZigzag: return "zigzag";
    case TrajectoryKind::kSquare: return "square";
    case TrajectoryKind::kWaypoints: return "waypoints";
  }
  return "unknown";
}

TrajectoryKind trajectory_kind_from_string(const std::string& name) {
  for (auto kind : {TrajectoryKind::kStatic, TrajectoryKind::kLinearParallel,
                    TrajectoryKind::kLinearPerpendicular, TrajectoryKind::kCircularParallel,
                    TrajectoryKind::kCircularPerpendicular, TrajectoryKind::kCircularTilted,
                    TrajectoryKind::kZigzag, TrajectoryKind::kSquare,
                    TrajectoryKind::kWaypoints}) {
    if (to_string(kind) == name) return kind;
  }
  if (name == "custom" || name == "custom_waypoints") return TrajectoryKind::kWaypoints;
  throw Error(ErrorCode::kInvalidArgument, "unknown trajectory type '" + name + "'");
}

MotionSample sample_trajectory(const TrajectorySpec& spec, double t) {
  MotionSample m = raw_sample(spec, t);
  if (spec.kind == TrajectoryKind::kWaypoints) m.position -= raw_sample(spec, 0.0).position;
  return m;
}

std::string to_string(RotationAxis axis) {
  switch (axis) {
    case RotationAxis::kNone: return "none";
    case RotationAxis::kX: return "x";
    case RotationAxis::kY: return "y";
    case RotationAxis::kZ: return "z";
  }
  return "unknown";
}

RotationAxis rotation_axis_from_string(const std::string& name) {
  if (name == "none") return RotationAxis::kNone;
  if (name == "x" || name == "rot_x") return RotationAxis::kX;
  if (name == "y" || name == "rot_y") return RotationAxis::kY;
  if (name == "z" || name == "rot_z") return RotationAxis::kZ;
  throw Error(ErrorCode::kInvalidArgument, "unknown rotation axis '" + name + "'");
}

AttitudeSample sample_attitude(const RotationSpec& spec, double t) {
  Vec3 axis = Vec3::Zero();
  switch (spec.axis) {
    case RotationAxis::kNone: return {};
    case RotationAxis::kX: axis = Vec3::UnitX(); break;
    case RotationAxis::kY: axis = Vec3::UnitY(); break;
    case RotationAxis::kZ: axis = Vec3::UnitZ(); break;
  }
  double angle = spec.rate * t;
  double rate = spec.rate;
  if (spec.period > 0.0) {
    const double w = kTwoPi / spec.period;
    angle = spec.rate / w * std::sin(w * t);
    rate = spec.rate * std::cos(w * t);
  }
  return {Quat(Eigen::AngleAxisd(angle, axis)), rate * axis};
}

}  // namespace ruledvo
