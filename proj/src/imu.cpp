#include "ruledvo/imu.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ruledvo/errors.hpp"

namespace ruledvo {
namespace {

bool finite(const Vec3& v) { return v.allFinite(); }

// Index k of the sample interval [t_k, t_{k+1}] containing t.
std::size_t interval_index(const std::vector<ImuSample>& samples, double t) {
  auto it = std::upper_bound(
      samples.begin(), samples.end(), t,
      [](double value, const ImuSample& s) { return value < s.t; });
  std::size_t k = static_cast<std::size_t>(it - samples.begin());
  if (k == 0) return 0;
  return std::min(k - 1, samples.size() - 2);
}

Quat exp_map(const Vec3& phi) {
  const double angle = phi.norm();
  if (angle < 1e-12) {
    return Quat(1.0, 0.5 * phi.x(), 0.5 * phi.y(), 0.5 * phi.z()).normalized();
  }
  return Quat(Eigen::AngleAxisd(angle, phi / angle));
}

std::vector<double> merged_grid(std::vector<double> nodes) {
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  return nodes;
}

[[noreturn]] void out_of_range(const char* what, double t) {
  std::ostringstream os;
  os.precision(17);
  os << what << ": time " << t << " is outside the covered span";
  throw Error(ErrorCode::kOutOfRange, os.str());
}

template <typename T>
T lookup(const std::vector<double>& times, const std::vector<T>& values,
         double t, const char* what) {
  if (times.empty() || !(t >= times.front() && t <= times.back())) {
    out_of_range(what, t);
  }
  auto it = std::lower_bound(times.begin(), times.end(), t);
  std::size_t i = static_cast<std::size_t>(it - times.begin());
  if (times[i] == t) return values[i];
  const double w = (t - times[i - 1]) / (times[i] - times[i - 1]);
  return values[i - 1] + w * (values[i] - values[i - 1]);
}

}  // namespace

ImuTrack::ImuTrack(std::vector<ImuSample> samples, double sample_rate_hint)
    : samples_(std::move(samples)), sample_rate_hint_(sample_rate_hint) {
  if (samples_.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument,
                "an IMU track needs at least two samples");
  }
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    const auto& s = samples_[i];
    if (!std::isfinite(s.t) || !finite(s.accel) || !finite(s.gyro)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "IMU sample " + std::to_string(i) + " is not finite");
    }
    if (i > 0 && !(s.t > samples_[i - 1].t)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "IMU timestamps must be strictly increasing (sample " +
                      std::to_string(i) + ")");
    }
  }
  if (sample_rate_hint_ <= 0.0) {
    sample_rate_hint_ = static_cast<double>(samples_.size() - 1) /
                        (end_time() - begin_time());
  }
}

ImuTrack ImuTrack::slice(double t_begin, double t_end) const {
  if (!covers(t_begin)) out_of_range("ImuTrack::slice", t_begin);
  if (!covers(t_end)) out_of_range("ImuTrack::slice", t_end);
  std::size_t first = interval_index(samples_, t_begin);
  std::size_t last = interval_index(samples_, t_end) + 1;
  if (samples_[last - 1].t == t_end) last -= 1;
  last = std::max(last, first + 1);
  std::vector<ImuSample> out(samples_.begin() + static_cast<long>(first),
                             samples_.begin() + static_cast<long>(last) + 1);
  return ImuTrack(std::move(out), sample_rate_hint_);
}

Quat RotationTable::at(double t) const {
  if (!covers(t)) out_of_range("RotationTable::at", t);
  auto it = std::lower_bound(timestamps.begin(), timestamps.end(), t);
  std::size_t i = static_cast<std::size_t>(it - timestamps.begin());
  if (timestamps[i] == t) return rotations[i];
  const double w = (t - timestamps[i - 1]) / (timestamps[i] - timestamps[i - 1]);
  return rotations[i - 1].slerp(w, rotations[i]).normalized();
}

RotationTable RotationTable::identity(double t_begin, double t_end) {
  RotationTable table;
  table.center_time = t_begin;
  table.timestamps = {t_begin, t_end};
  table.rotations = {Quat::Identity(), Quat::Identity()};
  if (t_end == t_begin) {
    table.timestamps.pop_back();
    table.rotations.pop_back();
  }
  return table;
}

Vec3 GammaTable::value_at(double t_rel) const {
  return lookup(times, values, t_rel, "GammaTable::value_at");
}

Vec3 GammaTable::rate_at(double t_rel) const {
  return lookup(times, rates, t_rel, "GammaTable::rate_at");
}

GammaTable GammaTable::negated() const {
  GammaTable out = *this;
  for (auto& v : out.values) v = -v;
  for (auto& v : out.rates) v = -v;
  return out;
}

GammaTable integrate_gamma(const ImuTrack& track, double t0,
                           std::span<const double> query_times,
                           const RotationTable& derotation) {
  if (!track.covers(t0)) out_of_range("integrate_gamma origin", t0);
  double t_max = t0;
  for (double q : query_times) {
    if (!track.covers(q) || q < t0) out_of_range("integrate_gamma query", q);
    t_max = std::max(t_max, q);
  }
  if (!derotation.covers(t0)) out_of_range("integrate_gamma derotation", t0);
  if (!derotation.covers(t_max)) {
    out_of_range("integrate_gamma derotation", t_max);
  }

  const auto& samples = track.samples();
  std::vector<double> nodes(query_times.begin(), query_times.end());
  nodes.push_back(t0);
  for (const auto& s : samples) {
    if (s.t > t0 && s.t < t_max) nodes.push_back(s.t);
  }
  nodes = merged_grid(std::move(nodes));

  // Derotated accelerations at the samples touching [t0, t_max].
  const std::size_t k_first = interval_index(samples, t0);
  const std::size_t k_last = interval_index(samples, t_max) + 1;
  std::vector<Vec3> accel(k_last - k_first + 1);
  for (std::size_t k = k_first; k <= k_last; ++k) {
    const double ts = std::clamp(samples[k].t, derotation.timestamps.front(),
                                 derotation.timestamps.back());
    accel[k - k_first] = derotation.at(ts).conjugate() * samples[k].accel;
  }
  auto accel_at = [&](double t) -> Vec3 {
    const std::size_t k = interval_index(samples, t);
    const double ta = samples[k].t;
    const double tb = samples[k + 1].t;
    const Vec3& aa = accel[k - k_first];
    const Vec3& ab = accel[k + 1 - k_first];
    if (t == ta) return aa;
    if (t == tb) return ab;
    const double w = (t - ta) / (tb - ta);
    return aa + w * (ab - aa);
  };

  GammaTable table;
  table.origin = t0;
  table.times.reserve(nodes.size());
  table.values.reserve(nodes.size());
  table.rates.reserve(nodes.size());

  Vec3 value = Vec3::Zero();
  Vec3 rate = Vec3::Zero();
  Vec3 a_prev = accel_at(nodes.front());
  table.times.push_back(nodes.front() - t0);
  table.values.push_back(value);
  table.rates.push_back(rate);
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    const double h = nodes[i] - nodes[i - 1];
    const Vec3 a = accel_at(nodes[i]);
    const Vec3 next_rate = rate + 0.5 * h * (a_prev + a);
    value += 0.5 * h * (rate + next_rate);
    rate = next_rate;
    a_prev = a;
    table.times.push_back(nodes[i] - t0);
    table.values.push_back(value);
    table.rates.push_back(rate);
  }
  return table;
}

RotationTable integrate_gyro(const ImuTrack& track, double center_time) {
  if (!track.covers(center_time)) {
    out_of_range("integrate_gyro center", center_time);
  }
  const auto& samples = track.samples();
  std::vector<double> nodes;
  nodes.reserve(samples.size() + 1);
  for (const auto& s : samples) nodes.push_back(s.t);
  nodes.push_back(center_time);
  nodes = merged_grid(std::move(nodes));

  const std::size_t center =
      static_cast<std::size_t>(std::lower_bound(nodes.begin(), nodes.end(),
                                                center_time) -
                               nodes.begin());
  auto rate_on = [&](double t_left) -> Vec3 {
    const std::size_t k = interval_index(samples, t_left);
    return 0.5 * (samples[k].gyro + samples[k + 1].gyro);
  };

  // center_from_camera, propagated outward from the center node.
  std::vector<Quat> center_from_cam(nodes.size(), Quat::Identity());
  for (std::size_t i = center; i + 1 < nodes.size(); ++i) {
    const double h = nodes[i + 1] - nodes[i];
    center_from_cam[i + 1] =
        (center_from_cam[i] * exp_map(rate_on(nodes[i]) * h)).normalized();
  }
  for (std::size_t i = center; i > 0; --i) {
    const double h = nodes[i] - nodes[i - 1];
    center_from_cam[i - 1] =
        (center_from_cam[i] * exp_map(-rate_on(nodes[i - 1]) * h))
            .normalized();
  }

  RotationTable table;
  table.center_time = center_time;
  table.timestamps = std::move(nodes);
  table.rotations.reserve(center_from_cam.size());
  for (const auto& q : center_from_cam) table.rotations.push_back(q.conjugate());
  return table;
}

DerotatedObservations derotate_observations(std::span<const Observation> obs,
                                            const RotationTable& rot) {
  DerotatedObservations out;
  out.observations.reserve(obs.size());
  for (const auto& o : obs) {
    const Quat cam_from_center = rot.at(o.t);
    const Vec3 ray = cam_from_center.conjugate() * Vec3(o.p.x(), o.p.y(), 1.0);
    if (!(ray.z() > kMinDepth)) {
      ++out.dropped;
      continue;
    }
    out.observations.push_back({o.t, ray.head<2>() / ray.z()});
  }
  return out;
}

Quat rechain_window_rotation(const Quat& prev_center_from_global,
                             const RotationTable& rot, double new_center) {
  return (rot.at(new_center) * prev_center_from_global).normalized();
}

}  // namespace ruledvo
