#include "ruledvo/evaluate.hpp"

#include <algorithm>
#include <cmath>

#include "ruledvo/errors.hpp"

namespace ruledvo {
namespace {

void check_track(const TimedPositions& track, const char* name) {
  if (track.t.empty() || track.t.size() != track.p.size()) {
    throw Error(ErrorCode::kInvalidArgument, std::string(name) + " track is empty or malformed");
  }
  for (std::size_t i = 1; i < track.t.size(); ++i) {
    if (!(track.t[i] > track.t[i - 1])) {
      throw Error(ErrorCode::kInvalidArgument,
                  std::string(name) + " track times must be strictly increasing");
    }
  }
}

}  // namespace

AxisStats axis_stats(std::span<const double> values) {
  AxisStats s;
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(sq / static_cast<double>(values.size()));
  return s;
}

Vec3 interpolate(const TimedPositions& track, double t) {
  auto it = std::lower_bound(track.t.begin(), track.t.end(), t);
  if (it == track.t.end() || (it == track.t.begin() && *it != t)) {
    throw Error(ErrorCode::kTimeRangeMismatch, "time outside the track span");
  }
  const auto i = static_cast<std::size_t>(it - track.t.begin());
  if (track.t[i] == t) return track.p[i];
  const double w = (t - track.t[i - 1]) / (track.t[i] - track.t[i - 1]);
  return track.p[i - 1] + w * (track.p[i] - track.p[i - 1]);
}

TrajectoryErrorStats evaluate_trajectory(const TimedPositions& estimate,
                                         const TimedPositions& truth) {
  check_track(estimate, "estimate");
  check_track(truth, "truth");
  // Frame times written as text may differ from the truth in the last bit;
  // allow for that at the ends of the estimate.
  const double slack = 1e-9;
  std::vector<double> ex, ey, ez;
  for (std::size_t i = 0; i < truth.t.size(); ++i) {
    double t = truth.t[i];
    if (t < estimate.t.front() - slack || t > estimate.t.back() + slack) continue;
    t = std::clamp(t, estimate.t.front(), estimate.t.back());
    const Vec3 d = (interpolate(estimate, t) - truth.p[i]).cwiseAbs();
    ex.push_back(d.x());
    ey.push_back(d.y());
    ez.push_back(d.z());
  }
  if (ex.empty()) {
    throw Error(ErrorCode::kTimeRangeMismatch,
                "estimate and truth do not overlap in time");
  }
  TrajectoryErrorStats stats;
  stats.x = axis_stats(ex);
  stats.y = axis_stats(ey);
  stats.z = axis_stats(ez);
  stats.samples = ex.size();
  return stats;
}

double mean_line_distance(const LineState& truth, const LineState& estimate,
                          double half_length, int samples) {
  const LineState t = canonicalize_line(truth.x0, truth.v0);
  const LineState e = canonicalize_line(estimate.x0, estimate.v0);
  if (samples < 2) return point_to_line_distance(t.x0, e);
  double sum = 0.0;
  for (int i = 0; i < samples; ++i) {
    const double s = -half_length + 2.0 * half_length * i / (samples - 1);
    sum += point_to_line_distance(t.x0 + s * t.v0, e);
  }
  return sum / samples;
}

}  // namespace ruledvo
