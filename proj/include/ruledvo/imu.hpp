#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ruledvo/geometry.hpp"
#include "ruledvo/types.hpp"

namespace ruledvo {

struct ImuSample {
  double t = 0.0;
  Vec3 accel = Vec3::Zero();  // specific force, camera frame, m/s^2
  Vec3 gyro = Vec3::Zero();   // angular velocity, camera frame, rad/s
};

// Validated, time-ordered IMU stream.
class ImuTrack {
 public:
  ImuTrack() = default;
  // Throws InvalidArgument unless there are at least two finite samples
  // with strictly increasing timestamps.
  explicit ImuTrack(std::vector<ImuSample> samples, double sample_rate_hint = 0.0);

  const std::vector<ImuSample>& samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  double sample_rate_hint() const { return sample_rate_hint_; }
  double begin_time() const { return samples_.front().t; }
  double end_time() const { return samples_.back().t; }
  bool covers(double t) const { return t >= begin_time() && t <= end_time(); }

  // Sub-track containing every sample in [t_begin, t_end] plus the samples
  // bracketing both ends.
  ImuTrack slice(double t_begin, double t_end) const;

 private:
  std::vector<ImuSample> samples_;
  double sample_rate_hint_ = 0.0;
};

// Camera-from-center rotations sampled on a time grid. The entry at
// center_time is the identity.
struct RotationTable {
  double center_time = 0.0;
  std::vector<double> timestamps;
  std::vector<Quat> rotations;

  bool covers(double t) const {
    return !timestamps.empty() && t >= timestamps.front() &&
           t <= timestamps.back();
  }
  // Exact at grid nodes, slerp in between. Throws OutOfRange.
  Quat at(double t) const;

  // Table with identity rotations on [t_begin, t_end].
  static RotationTable identity(double t_begin, double t_end);
};

// Double time-integral of (derotated) acceleration relative to `origin`.
// `times` are relative to origin; `rates` hold the inner integral
// (velocity contribution) at the same nodes.
struct GammaTable {
  double origin = 0.0;
  std::vector<double> times;
  std::vector<Vec3> values;
  std::vector<Vec3> rates;

  // Lookup by time relative to origin; exact at nodes, linear in between.
  // Throws OutOfRange.
  Vec3 value_at(double t_rel) const;
  Vec3 rate_at(double t_rel) const;
  double span() const { return times.empty() ? 0.0 : times.back(); }

  GammaTable negated() const;
};

// Trapezoidal double integration of the derotated accelerometer signal
// from t0 to every query time. Query times are absolute; the integration
// grid is the union of sample times, t0 and query times, with
// accelerations linearly interpolated at non-sample nodes.
GammaTable integrate_gamma(const ImuTrack& track, double t0,
                           std::span<const double> query_times,
                           const RotationTable& derotation);

// Integrates the gyro stream into camera-from-center rotations. Each
// inter-sample interval uses the mean of its two gyro samples as a
// constant rate; quaternions are renormalized after every step.
RotationTable integrate_gyro(const ImuTrack& track, double center_time);

struct DerotatedObservations {
  std::vector<Observation> observations;
  std::size_t dropped = 0;  // rays that end up behind the center frame
};

// Re-expresses each observation in the rotation-center frame. Observation
// times must share the table's time base.
DerotatedObservations derotate_observations(std::span<const Observation> obs,
                                            const RotationTable& rot);

// new_center_from_global = rot(new_center) * prev_center_from_global.
Quat rechain_window_rotation(const Quat& prev_center_from_global,
                             const RotationTable& rot, double new_center);

}  // namespace ruledvo
