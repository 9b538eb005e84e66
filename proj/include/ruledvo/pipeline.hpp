#pragma once

// Sliding-window estimation: detect lines in the first frames, extrude the
// surfaces frame by frame until the window is full, then slide it along
// the sequence and chain the windows into a trajectory.

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ruledvo/detection.hpp"
#include "ruledvo/estimator.hpp"
#include "ruledvo/imu.hpp"
#include "ruledvo/odometry.hpp"
#include "ruledvo/translation.hpp"

namespace ruledvo {

struct PipelineConfig {
  int window_frames = 140;        // k, frame intervals per window
  double max_window_span = 2.0;   // seconds
  double init_interval = 0.1;     // seconds of data used for detection
  double max_frame_gap = 0.05;    // seconds
  double tau = 0.01;              // association distance, normalized units
  double a_init = 1.0;            // assumed depth of detected lines, m
  Vec3 g_init = Vec3::Zero();
  int starvation_limit = 30;      // frames without new points before warning
  bool derotate = true;           // use the gyro to remove camera rotation
  // Weak pull of every window solve towards its warm start. Depth scale is
  // barely observable in short windows and not at all in windows without
  // acceleration; this keeps it at the value carried over instead of letting
  // noise move it.
  double anchor_weight = 1e-3;
  DetectionConfig detection;
  SolverConfig solver;
};

// One camera frame of raw data: absolute time and undistorted normalized
// points in the camera frame of that instant.
struct Frame {
  double t = 0.0;
  std::vector<Observation> points;
};

// Rotation and translation integrals of an IMU track, rebuilt for
// whichever window asks.
class ImuKinematics {
 public:
  ImuKinematics(ImuTrack track, bool use_gyro = true)
      : track_(std::move(track)), use_gyro_(use_gyro) {}

  const ImuTrack& track() const { return track_; }

  // Camera-from-center rotations over [center, t_end].
  RotationTable rotations(double center, double t_end) const;

  // Gamma of the line-relative motion (the negated derotated specific
  // force) from `origin`, sampled at the absolute `times`.
  GammaTable gamma(double origin, std::span<const double> times,
                   const RotationTable& rot) const;

 private:
  ImuTrack track_;
  bool use_gyro_ = true;
};

struct WindowDiagnostics {
  double loss = 0.0;  // mean squared residual per observation
  int restarts = 0;
  int iterations = 0;
  int attempts = 0;
  bool converged = false;
  bool infeasible = false;
  bool unbounded_direction = false;
  std::string termination;
  double depth_violation_fraction = 0.0;
  std::size_t observations = 0;
  std::size_t associated = 0;   // points of the newest frame added to E
  std::size_t ambiguous = 0;    // within tau of two or more rulings
  std::size_t unassigned = 0;   // within tau of no ruling
  std::size_t dropped = 0;      // lost during derotation
  std::size_t trimmed = 0;      // removed by the slide
  // Worst constraint residuals right after accepted solver steps.
  double max_unit_norm_violation = 0.0;
  double max_orthogonality_violation = 0.0;
  std::vector<int> active_lines;  // lines that took part in the solve
};

// State of one window: surfaces, their point sets and the IMU integrals
// relative to the window origin (which is also the rotation center).
struct WindowEstimate {
  double t_start = 0.0;
  double t_end = 0.0;
  std::vector<double> frame_times;  // absolute
  SurfaceSetParams params;
  // E: per-line points, derotated, times relative to t_start.
  std::vector<std::vector<Observation>> points;
  // The same points as recorded, absolute times, kept for re-derotation.
  std::vector<std::vector<Observation>> raw_points;
  double rotation_center = 0.0;
  RotationTable rotation;
  GammaTable gamma;
  std::vector<int> starved_frames;  // consecutive frames without new points
  WindowDiagnostics diagnostics;

  std::size_t num_frames() const { return frame_times.size(); }
  TranslationSignal translation() const { return {params.shared, gamma}; }
  WindowSummary summary() const;
};

// Starts a window on the first frames. Points within `radius` of exactly
// one predicted ruling seed the point sets; after the first solve all
// points are re-associated with config.tau and the window is solved again.
WindowEstimate start_window(std::span<const Frame> frames, const SurfaceSetParams& init,
                            const ImuKinematics& imu, const PipelineConfig& config,
                            double radius);

// Adds one frame to the window and re-solves from the current estimate.
WindowEstimate extrude_surface(WindowEstimate est, const Frame& frame,
                               const ImuKinematics& imu, const PipelineConfig& config);

// Adds one frame, drops the oldest one, moves the window origin to the
// second frame and re-solves.
WindowEstimate slide_window(WindowEstimate est, const Frame& frame,
                            const ImuKinematics& imu, const PipelineConfig& config);

// Image line of a line's ruling at time t_rel of the window.
std::optional<ImageLine> predicted_ruling(const WindowEstimate& est, std::size_t line,
                                          double t_rel);

struct PipelineInput {
  std::vector<Frame> frames;
  ImuTrack imu;
  Intrinsics intrinsics;
  // Raster frames of the initial interval; when present they are used for
  // detection instead of the data points.
  std::vector<TimedFrame> init_rasters;
  // Skips detection and starts from these parameters.
  std::optional<SurfaceSetParams> initial_params;
};

struct WindowRecord {
  double t_start = 0.0;
  double t_end = 0.0;
  std::size_t frames = 0;
  std::vector<std::size_t> points_per_line;
  WindowDiagnostics diagnostics;
};

struct PipelineResult {
  std::vector<WindowSummary> windows;  // every full window, in order
  std::vector<WindowRecord> records;   // one per full window
  OdometryResult odometry;
  std::vector<LineDetection> detections;
  std::vector<std::string> warnings;
  bool infeasible = false;
};

using WindowCallback = std::function<void(const WindowEstimate&)>;

// Runs the whole sequence. Stops at the first infeasible window and
// reports it through PipelineResult::infeasible. Throws NotEnoughLines,
// FrameGap and InputError.
PipelineResult run_pipeline(const PipelineInput& input, const PipelineConfig& config,
                            const WindowCallback& on_window = {});

}  // namespace ruledvo
