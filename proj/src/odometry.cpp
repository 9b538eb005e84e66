#include "ruledvo/odometry.hpp"

#include <sstream>

#include "ruledvo/errors.hpp"

namespace ruledvo {
namespace {

void validate(const WindowSummary& w) {
  const std::size_t n = w.frame_times.size();
  if (n == 0 || w.displacement.size() != n || w.cam_from_center.size() != n) {
    throw Error(ErrorCode::kInvalidArgument,
                "window summary needs one displacement and rotation per frame");
  }
  if (w.frame_times.front() != w.t_start) {
    throw Error(ErrorCode::kInvalidArgument,
                "window summary must start at its first frame");
  }
}

LineState to_basis(const LineState& line, const Quat& basis_from_center,
                   const Vec3& origin) {
  return canonicalize_line(origin + basis_from_center * line.x0,
                           basis_from_center * line.v0);
}

}  // namespace

void OdometryAccumulator::add(const WindowSummary& window) {
  validate(window);
  if (!has_last_) {
    committed_.timestamps.push_back(window.t_start);
    committed_.positions.push_back(Vec3::Zero());
  } else {
    if (last_.frame_times.size() < 2 || last_.frame_times[1] != window.t_start) {
      std::ostringstream os;
      os.precision(17);
      os << "window starting at " << window.t_start
         << " does not begin at the previous window's second frame";
      throw Error(ErrorCode::kSeamMismatch, os.str());
    }
    const Vec3 next =
        origin_position_ - center_from_basis_.conjugate() * last_.displacement[1];
    center_from_basis_ = (last_.cam_from_center[1] * center_from_basis_).normalized();
    origin_position_ = next;
    committed_.timestamps.push_back(window.t_start);
    committed_.positions.push_back(next);
  }

  const Quat basis_from_center = center_from_basis_.conjugate();
  std::vector<LineState> basis_lines;
  basis_lines.reserve(window.lines.size());
  for (const auto& line : window.lines) {
    basis_lines.push_back(to_basis(line, basis_from_center, origin_position_));
  }
  committed_.window_starts.push_back(window.t_start);
  committed_.window_lines.push_back(window.lines);
  committed_.window_lines_basis.push_back(std::move(basis_lines));

  last_ = window;
  has_last_ = true;
}

OdometryResult OdometryAccumulator::result() const {
  OdometryResult out = committed_;
  if (!has_last_) return out;
  const Quat basis_from_center = center_from_basis_.conjugate();
  for (std::size_t i = 1; i < last_.frame_times.size(); ++i) {
    out.timestamps.push_back(last_.frame_times[i]);
    out.positions.push_back(origin_position_ - basis_from_center * last_.displacement[i]);
  }
  return out;
}

OdometryResult accumulate_odometry(std::span<const WindowSummary> windows) {
  OdometryAccumulator acc;
  for (const auto& w : windows) acc.add(w);
  return acc.result();
}

}  // namespace ruledvo
