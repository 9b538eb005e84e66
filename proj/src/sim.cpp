#include "ruledvo/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "ruledvo/errors.hpp"

namespace ruledvo {
namespace {

// Independent random streams per purpose.
enum Stream : std::uint64_t {
  kImuStream = 1,
  kObservationStream = 2,
  kOutlierStream = 3,
  kRasterStream = 4,
};

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream,
                         std::uint64_t index = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

[[noreturn]] void invalid(const std::string& field, const std::string& what) {
  throw Error(ErrorCode::kInvalidArgument, field + ": " + what);
}

void require_finite(const std::string& field, double value) {
  if (!std::isfinite(value)) invalid(field, "must be finite");
}

// Normalized image bounds, inset by one pixel so rendered segments stay on
// the canvas.
struct FieldOfView {
  double x_min, x_max, y_min, y_max;
};

FieldOfView field_of_view(const Intrinsics& k) {
  return {(0.5 - k.cx) / k.fx, (k.width - 1.5 - k.cx) / k.fx, (0.5 - k.cy) / k.fy,
          (k.height - 1.5 - k.cy) / k.fy};
}

double segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  double s = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
  s = std::clamp(s, 0.0, 1.0);
  return (p - (a + s * ab)).norm();
}

}  // namespace

std::vector<LineState> default_lines() {
  return {
      canonicalize_line(Vec3(0.0, -0.35, 1.5), Vec3(1.0, 0.35, 0.15)),
      canonicalize_line(Vec3(0.0, 0.4, 1.8), Vec3(1.0, -0.5, -0.1)),
      canonicalize_line(Vec3(-0.45, 0.0, 1.6), Vec3(0.4, 1.0, 0.1)),
      canonicalize_line(Vec3(0.5, 0.0, 2.0), Vec3(-0.3, 1.0, 0.05)),
  };
}

void validate(const ScenarioSpec& spec) {
  require_finite("duration", spec.duration);
  if (!(spec.duration > 0.0)) invalid("duration", "must be positive");
  if (!(spec.fps > 0.0) || !std::isfinite(spec.fps)) invalid("fps", "must be positive");
  if (!(spec.imu_rate > 0.0) || !std::isfinite(spec.imu_rate)) {
    invalid("imu_rate", "must be positive");
  }
  if (std::lround(spec.duration * spec.fps) < 1) {
    invalid("duration", "shorter than one frame");
  }
  if (!(spec.noise.accel_sigma >= 0.0)) invalid("noise.accel_sigma", "must be >= 0");
  if (!(spec.noise.gyro_sigma >= 0.0)) invalid("noise.gyro_sigma", "must be >= 0");
  if (!spec.noise.accel_bias.allFinite()) invalid("noise.accel_bias", "must be finite");
  if (!spec.noise.gravity.allFinite()) invalid("noise.gravity", "must be finite");
  if (!(spec.obs_noise >= 0.0)) invalid("obs_noise", "must be >= 0");
  if (!(spec.outlier_fraction >= 0.0 && spec.outlier_fraction <= 1.0)) {
    invalid("outlier_fraction", "must be in [0, 1]");
  }
  if (spec.points_per_line < 1) invalid("points_per_line", "must be at least 1");
  if (!(spec.max_alpha > 0.0)) invalid("max_alpha", "must be positive");
  if (!(spec.min_depth > 0.0)) invalid("min_depth", "must be positive");
  for (std::size_t i = 0; i < spec.lines.size(); ++i) {
    const auto& l = spec.lines[i];
    const std::string field = "lines[" + std::to_string(i) + "]";
    if (!l.x0.allFinite() || !l.v0.allFinite()) invalid(field, "must be finite");
    if (!(l.v0.norm() > kMinDirectionNorm)) invalid(field + ".v0", "must be nonzero");
  }
  const auto& tr = spec.trajectory;
  require_finite("trajectory.amplitude", tr.amplitude);
  if (tr.kind != TrajectoryKind::kStatic && tr.kind != TrajectoryKind::kWaypoints &&
      !(tr.period > 0.0)) {
    invalid("trajectory.period", "must be positive");
  }
  if (tr.kind == TrajectoryKind::kZigzag &&
      !(tr.corner_blend >= 0.0 && tr.corner_blend <= 0.5 * tr.period)) {
    invalid("trajectory.corner_blend", "must be in [0, period / 2]");
  }
  if (tr.kind == TrajectoryKind::kSquare &&
      !(tr.dwell >= 0.0 && tr.dwell < 0.25 * tr.period)) {
    invalid("trajectory.dwell", "must be in [0, period / 4)");
  }
  if (tr.kind == TrajectoryKind::kWaypoints) {
    if (tr.waypoints.size() < 2) invalid("trajectory.waypoints", "need at least two");
    for (std::size_t i = 1; i < tr.waypoints.size(); ++i) {
      if (!(tr.waypoints[i].t > tr.waypoints[i - 1].t)) {
        invalid("trajectory.waypoints", "times must be strictly increasing");
      }
    }
  }
  require_finite("rotation.rate", spec.rotation.rate);
  require_finite("rotation.period", spec.rotation.period);
  const auto& k = spec.intrinsics;
  if (!(k.fx > 0.0) || !(k.fy > 0.0)) invalid("intrinsics", "focal lengths must be positive");
  if (k.width < 2 || k.height < 2) invalid("intrinsics", "image size too small");
  if (!(spec.raster.salt_fraction >= 0.0 && spec.raster.salt_fraction <= 1.0)) {
    invalid("raster.salt_fraction", "must be in [0, 1]");
  }
  if (spec.raster.background < 0 || spec.raster.background > 255 ||
      spec.raster.foreground < 0 || spec.raster.foreground > 255) {
    invalid("raster", "gray levels must be in [0, 255]");
  }
}

Scene::Scene(ScenarioSpec spec) : spec_(std::move(spec)) {
  validate(spec_);
  if (spec_.lines.empty()) spec_.lines = default_lines();
  for (const auto& l : spec_.lines) lines_.push_back(canonicalize_line(l.x0, l.v0));
}

CameraPose Scene::pose(double t) const {
  return {t, motion(t).position, attitude(t).world_from_cam};
}

std::vector<double> Scene::frame_times() const {
  const long n = std::lround(spec_.duration * spec_.fps);
  std::vector<double> times(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) times[static_cast<std::size_t>(i)] = i / spec_.fps;
  return times;
}

ImuSample Scene::imu_reading(double t) const {
  const MotionSample m = motion(t);
  const AttitudeSample a = attitude(t);
  const Quat cam_from_world = a.world_from_cam.conjugate();
  ImuSample s;
  s.t = t;
  s.accel = cam_from_world * (m.acceleration + spec_.noise.gravity) + spec_.noise.accel_bias;
  s.gyro = a.angular_velocity;
  return s;
}

LineState Scene::line_in_camera(std::size_t line, double t) const {
  const CameraPose p = pose(t);
  const Quat cam_from_world = p.world_from_cam.conjugate();
  const LineState& w = lines_.at(line);
  return canonicalize_line(cam_from_world * (w.x0 - p.position), cam_from_world * w.v0);
}

Vec3 Scene::window_displacement(double t_start, double t) const {
  const CameraPose p0 = pose(t_start);
  return -(p0.world_from_cam.conjugate() * (motion(t).position - p0.position));
}

SurfaceSetParams Scene::window_params(double t_start) const {
  SurfaceSetParams params;
  for (std::size_t l = 0; l < lines_.size(); ++l) {
    params.lines.push_back(LineBlock::from_line_state(line_in_camera(l, t_start)));
  }
  const Quat cam_from_world = attitude(t_start).world_from_cam.conjugate();
  params.shared.set_velocity(-(cam_from_world * motion(t_start).velocity));
  params.shared.g = cam_from_world * spec_.noise.gravity + spec_.noise.accel_bias;
  return params;
}

std::optional<std::pair<double, double>> Scene::visible_interval(
    const LineState& cam_line) const {
  const FieldOfView fov = field_of_view(spec_.intrinsics);
  double lo = -spec_.max_alpha;
  double hi = spec_.max_alpha;
  // Each constraint reads k0 + k1 * alpha <= 0.
  auto constrain = [&](double k0, double k1) {
    if (std::abs(k1) < 1e-15) {
      if (k0 > 0.0) hi = -std::numeric_limits<double>::infinity();
      return;
    }
    const double root = -k0 / k1;
    if (k1 > 0.0) {
      hi = std::min(hi, root);
    } else {
      lo = std::max(lo, root);
    }
  };
  const Vec3& x = cam_line.x0;
  const Vec3& v = cam_line.v0;
  constrain(spec_.min_depth - x.z(), -v.z());
  constrain(x.x() - fov.x_max * x.z(), v.x() - fov.x_max * v.z());
  constrain(fov.x_min * x.z() - x.x(), fov.x_min * v.z() - v.x());
  constrain(x.y() - fov.y_max * x.z(), v.y() - fov.y_max * v.z());
  constrain(fov.y_min * x.z() - x.y(), fov.y_min * v.z() - v.y());
  if (!(hi - lo > 1e-6)) return std::nullopt;
  return std::make_pair(lo, hi);
}

GroundTruth Scene::ground_truth() const {
  GroundTruth truth;
  for (double t : frame_times()) truth.poses.push_back(pose(t));
  truth.world_lines = lines_;
  truth.gravity = spec_.noise.gravity;
  truth.accel_bias = spec_.noise.accel_bias;
  return truth;
}

SyntheticData synthesize(const ScenarioSpec& spec) {
  const Scene scene(spec);
  const ScenarioSpec& s = scene.spec();
  SyntheticData data;

  std::mt19937_64 imu_rng = make_rng(s.seed, kImuStream);
  std::normal_distribution<double> normal(0.0, 1.0);
  const long n_imu = std::lround(s.duration * s.imu_rate) + 1;
  std::vector<ImuSample> samples;
  samples.reserve(static_cast<std::size_t>(n_imu));
  for (long i = 0; i < n_imu; ++i) {
    ImuSample sample = scene.imu_reading(i / s.imu_rate);
    for (int c = 0; c < 3; ++c) sample.accel[c] += s.noise.accel_sigma * normal(imu_rng);
    for (int c = 0; c < 3; ++c) sample.gyro[c] += s.noise.gyro_sigma * normal(imu_rng);
    samples.push_back(sample);
  }
  data.imu = ImuTrack(std::move(samples), s.imu_rate);

  std::mt19937_64 obs_rng = make_rng(s.seed, kObservationStream);
  std::mt19937_64 outlier_rng = make_rng(s.seed, kOutlierStream);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const FieldOfView fov = field_of_view(s.intrinsics);
  const auto times = scene.frame_times();
  std::vector<std::size_t> invisible(scene.world_lines().size(), 0);

  for (double t : times) {
    Frame frame;
    frame.t = t;
    for (std::size_t l = 0; l < scene.world_lines().size(); ++l) {
      const LineState cam_line = scene.line_in_camera(l, t);
      const auto interval = scene.visible_interval(cam_line);
      if (!interval) {
        ++invisible[l];
        continue;
      }
      for (int i = 0; i < s.points_per_line; ++i) {
        const double alpha =
            interval->first + (interval->second - interval->first) * unit(obs_rng);
        Vec2 p = project_ruling_point(cam_line, Vec3::Zero(), alpha);
        const double nx = normal(obs_rng);
        const double ny = normal(obs_rng);
        p += s.obs_noise * Vec2(nx, ny);
        // The outlier draws happen for every point so that the stream does
        // not depend on the outlier fraction.
        const double u = unit(outlier_rng);
        const double ox = unit(outlier_rng);
        const double oy = unit(outlier_rng);
        if (u < s.outlier_fraction) {
          p = Vec2(fov.x_min + (fov.x_max - fov.x_min) * ox,
                   fov.y_min + (fov.y_max - fov.y_min) * oy);
        }
        frame.points.push_back({t, p});
      }
    }
    data.frames.push_back(std::move(frame));
  }

  for (std::size_t l = 0; l < invisible.size(); ++l) {
    if (invisible[l] * 10 > times.size()) {
      std::ostringstream os;
      os << "line " << l << " is not visible in " << invisible[l] << " of "
         << times.size() << " frames";
      throw Error(ErrorCode::kLineNotVisible, os.str());
    }
  }
  data.truth = scene.ground_truth();
  return data;
}

GrayImage render_frame(const Scene& scene, double t) {
  const ScenarioSpec& s = scene.spec();
  const Intrinsics& k = s.intrinsics;
  GrayImage image(k.width, k.height, static_cast<std::uint8_t>(s.raster.background));
  const double bg = s.raster.background;
  const double fg = s.raster.foreground;
  for (std::size_t l = 0; l < scene.world_lines().size(); ++l) {
    const LineState cam_line = scene.line_in_camera(l, t);
    const auto interval = scene.visible_interval(cam_line);
    if (!interval) continue;
    const Vec2 a = k.to_pixel(project_ruling_point(cam_line, Vec3::Zero(), interval->first));
    const Vec2 b = k.to_pixel(project_ruling_point(cam_line, Vec3::Zero(), interval->second));
    const int x0 = std::max(0, static_cast<int>(std::floor(std::min(a.x(), b.x()) - 2)));
    const int x1 = std::min(k.width - 1, static_cast<int>(std::ceil(std::max(a.x(), b.x()) + 2)));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min(a.y(), b.y()) - 2)));
    const int y1 = std::min(k.height - 1, static_cast<int>(std::ceil(std::max(a.y(), b.y()) + 2)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double d = segment_distance(Vec2(x, y), a, b);
        const double coverage = std::clamp(1.5 - d, 0.0, 1.0);
        if (coverage <= 0.0) continue;
        const double value = bg + coverage * (fg - bg);
        auto& px = image.at(x, y);
        const auto level = static_cast<std::uint8_t>(std::lround(value));
        if (std::abs(value - bg) > std::abs(static_cast<double>(px) - bg)) px = level;
      }
    }
  }
  return image;
}

TimedFrame render_noisy_frame(const Scene& scene, std::size_t index) {
  const auto times = scene.frame_times();
  TimedFrame frame;
  frame.t = times.at(index);
  frame.image = render_frame(scene, frame.t);
  const double salt = scene.spec().raster.salt_fraction;
  if (salt > 0.0) {
    std::mt19937_64 rng = make_rng(scene.spec().seed, kRasterStream, index);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (auto& px : frame.image.pixels) {
      if (unit(rng) < salt) px = 255;
    }
  }
  return frame;
}

std::optional<ImageLine> projected_pixel_line(const Scene& scene, std::size_t line,
                                              double t) {
  try {
    const auto [r1, r2] = ruling_endpoints_in_image(scene.line_in_camera(line, t), Vec3::Zero());
    const Intrinsics& k = scene.spec().intrinsics;
    return ImageLine::through(k.to_pixel(r1), k.to_pixel(r2));
  } catch (const Error&) {
    return std::nullopt;
  }
}

}  // namespace ruledvo
