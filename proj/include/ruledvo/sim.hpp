#pragma once

// Synthetic scenes: lines in the world, an analytic camera motion, the IMU
// readings it produces and the image data a camera would see.

#include <cstdint>
#include <optional>
#include <vector>

#include "ruledvo/detection.hpp"
#include "ruledvo/estimator.hpp"
#include "ruledvo/image.hpp"
#include "ruledvo/imu.hpp"
#include "ruledvo/pipeline.hpp"
#include "ruledvo/trajectory.hpp"

namespace ruledvo {

struct NoiseSpec {
  double accel_sigma = 0.0;  // m/s^2
  double gyro_sigma = 0.0;   // rad/s
  Vec3 accel_bias = Vec3::Zero();
  Vec3 gravity = Vec3(0.0, -9.81, 0.0);  // world frame
};

struct RasterSpec {
  bool enabled = false;
  int background = 40;
  int foreground = 220;
  double salt_fraction = 0.0;
};

struct ScenarioSpec {
  std::vector<LineState> lines;  // world frame; empty means default_lines()
  TrajectorySpec trajectory;
  RotationSpec rotation;
  double duration = 12.0;  // s
  double fps = 90.0;
  double imu_rate = 200.0;
  NoiseSpec noise;
  double obs_noise = 0.0;  // normalized units
  double outlier_fraction = 0.0;
  int points_per_line = 50;
  double max_alpha = 5.0;     // sampled points stay within this of the foot
  double min_depth = 0.05;    // m, closest visible point
  std::uint64_t seed = 0;
  Intrinsics intrinsics;
  RasterSpec raster;
};

// Four lines 1.5 to 2 m ahead of the initial camera, tilted so that none
// is parallel to a coordinate axis and every line sees motion along x, y
// and z.
std::vector<LineState> default_lines();

// Throws InvalidArgument naming the offending field.
void validate(const ScenarioSpec& spec);

struct CameraPose {
  double t = 0.0;
  Vec3 position = Vec3::Zero();
  Quat world_from_cam = Quat::Identity();
};

struct GroundTruth {
  std::vector<CameraPose> poses;  // one per frame
  std::vector<LineState> world_lines;
  Vec3 gravity = Vec3::Zero();
  Vec3 accel_bias = Vec3::Zero();
};

// Analytic model of a scenario.
class Scene {
 public:
  explicit Scene(ScenarioSpec spec);

  const ScenarioSpec& spec() const { return spec_; }
  const std::vector<LineState>& world_lines() const { return lines_; }

  CameraPose pose(double t) const;
  MotionSample motion(double t) const { return sample_trajectory(spec_.trajectory, t); }
  AttitudeSample attitude(double t) const { return sample_attitude(spec_.rotation, t); }

  std::vector<double> frame_times() const;

  // Noiseless IMU reading at time t (specific force and rate in the
  // camera frame, gravity and accelerometer bias included).
  ImuSample imu_reading(double t) const;

  // World line expressed in the camera frame at time t.
  LineState line_in_camera(std::size_t line, double t) const;

  // Line-relative translation of a window starting at t_start, expressed
  // in the camera frame at t_start: X(t) = -R_cw(t_start) (c(t) - c(t_start)).
  Vec3 window_displacement(double t_start, double t) const;

  // True parameters of a window starting at t_start. g absorbs gravity and
  // the accelerometer bias (exact when the camera does not rotate).
  SurfaceSetParams window_params(double t_start) const;

  // Interval of alpha (along the canonical camera-frame line) whose points
  // are in front of the camera and inside the image; nullopt when none.
  std::optional<std::pair<double, double>> visible_interval(const LineState& cam_line) const;

  GroundTruth ground_truth() const;

 private:
  ScenarioSpec spec_;
  std::vector<LineState> lines_;
};

struct SyntheticData {
  ImuTrack imu;
  std::vector<Frame> frames;
  GroundTruth truth;
};

// Deterministic in spec.seed. Throws LineNotVisible when a line has no
// visible segment in more than 10% of the frames.
SyntheticData synthesize(const ScenarioSpec& spec);

// Anti-aliased rendering of the visible line segments at time t.
GrayImage render_frame(const Scene& scene, double t);

// Raster of frame `index` with the scenario's salt noise applied. Each
// frame draws from its own random stream, so frames can be rendered in
// any order.
TimedFrame render_noisy_frame(const Scene& scene, std::size_t index);

// Pixel line of a world line at time t (for checking detections).
std::optional<ImageLine> projected_pixel_line(const Scene& scene, std::size_t line, double t);

}  // namespace ruledvo
