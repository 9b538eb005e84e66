#pragma once

// Chaining per-window translation signals into one trajectory.

#include <span>
#include <vector>

#include "ruledvo/geometry.hpp"
#include "ruledvo/types.hpp"

namespace ruledvo {

// What odometry needs from a solved window. All vectors are indexed by the
// window's frames; frame 0 is the window origin and rotation center.
struct WindowSummary {
  double t_start = 0.0;
  std::vector<double> frame_times;       // absolute seconds
  std::vector<Vec3> displacement;        // X(t) in the center frame
  std::vector<Quat> cam_from_center;     // gyro rotation at each frame
  std::vector<LineState> lines;          // center frame
};

struct OdometryResult {
  std::vector<double> timestamps;
  std::vector<Vec3> positions;  // camera position in the first camera frame
  std::vector<double> window_starts;
  std::vector<std::vector<LineState>> window_lines;        // center frames
  std::vector<std::vector<LineState>> window_lines_basis;  // first camera frame
};

// Incremental form of accumulate_odometry. Each added window commits the
// step from its first to its second frame; the newest window also
// provides a provisional tail up to its last frame.
class OdometryAccumulator {
 public:
  // Throws SeamMismatch unless the window starts at the previous window's
  // second frame, InvalidArgument on malformed summaries.
  void add(const WindowSummary& window);
  OdometryResult result() const;
  std::size_t num_windows() const { return committed_.window_starts.size(); }

 private:
  OdometryResult committed_;  // positions up to the newest window's origin
  WindowSummary last_;
  Quat center_from_basis_ = Quat::Identity();
  Vec3 origin_position_ = Vec3::Zero();
  bool has_last_ = false;
};

// Positions are the negated displacements rotated into the basis frame and
// summed: p(t_{j+1}) = p(t_j) - R_basis_from_center_j * X_j(t_{j+1}).
OdometryResult accumulate_odometry(std::span<const WindowSummary> windows);

}  // namespace ruledvo
