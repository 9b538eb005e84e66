#pragma once

// Error statistics between an estimated and a true trajectory, in the
// per-axis "mean +- std of the absolute difference" format.

#include <span>
#include <vector>

#include "ruledvo/geometry.hpp"

namespace ruledvo {

struct AxisStats {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
};

struct TrajectoryErrorStats {
  AxisStats x, y, z;
  std::size_t samples = 0;
};

struct TimedPositions {
  std::vector<double> t;
  std::vector<Vec3> p;
};

AxisStats axis_stats(std::span<const double> values);

// Linear interpolation of a track at time t inside its span.
Vec3 interpolate(const TimedPositions& track, double t);

// Estimate is interpolated at every truth time inside its span. Throws
// TimeRangeMismatch when no truth time falls inside the estimate's span,
// InvalidArgument for malformed tracks.
TrajectoryErrorStats evaluate_trajectory(const TimedPositions& estimate,
                                         const TimedPositions& truth);

// Mean distance from `samples` points evenly spread over the segment of
// the true line within half_length of its foot to the estimated line.
double mean_line_distance(const LineState& truth, const LineState& estimate,
                          double half_length = 0.5, int samples = 21);

}  // namespace ruledvo
