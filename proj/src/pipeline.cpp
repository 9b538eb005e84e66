#include "ruledvo/pipeline.hpp"

#include <algorithm>
#include <sstream>

#include "ruledvo/errors.hpp"

namespace ruledvo {

RotationTable ImuKinematics::rotations(double center, double t_end) const {
  if (!track_.covers(center) || !track_.covers(t_end)) {
    std::ostringstream os;
    os.precision(17);
    os << "IMU data does not cover [" << center << ", " << t_end << "]";
    throw Error(ErrorCode::kOutOfRange, os.str());
  }
  if (!use_gyro_) return RotationTable::identity(center, t_end);
  return integrate_gyro(track_.slice(center, t_end), center);
}

GammaTable ImuKinematics::gamma(double origin, std::span<const double> times,
                                const RotationTable& rot) const {
  double t_max = origin;
  for (double t : times) t_max = std::max(t_max, t);
  return integrate_gamma(track_.slice(origin, t_max), origin, times, rot).negated();
}

WindowSummary WindowEstimate::summary() const {
  WindowSummary s;
  s.t_start = t_start;
  s.frame_times = frame_times;
  for (double t : frame_times) {
    const double t_rel = t - t_start;
    s.displacement.push_back(translation_at(params.shared, t_rel, gamma.value_at(t_rel)));
    s.cam_from_center.push_back(rotation.at(t));
  }
  for (const auto& line : params.lines) s.lines.push_back(line.to_line_state());
  return s;
}

std::optional<ImageLine> predicted_ruling(const WindowEstimate& est, std::size_t line,
                                          double t_rel) {
  try {
    const Vec3 xt = translation_at(est.params.shared, t_rel, est.gamma.value_at(t_rel));
    const auto [r1, r2] =
        ruling_endpoints_in_image(est.params.lines.at(line).to_line_state(), xt);
    return ImageLine::through(r1, r2);
  } catch (const Error&) {
    return std::nullopt;
  }
}

namespace {

void refresh_tables(WindowEstimate& est, const ImuKinematics& imu) {
  est.rotation_center = est.t_start;
  est.t_end = est.frame_times.back();
  est.rotation = imu.rotations(est.t_start, est.t_end);
  est.gamma = imu.gamma(est.t_start, est.frame_times, est.rotation);
}

// Derotates raw points into the window's center frame. Points that end up
// behind the center camera are dropped and counted.
struct DerotatedFrame {
  std::vector<Observation> raw;
  std::vector<Observation> points;  // relative times
  std::size_t dropped = 0;
};

DerotatedFrame derotate(std::span<const Observation> raw, const WindowEstimate& est) {
  DerotatedFrame out;
  for (const auto& obs : raw) {
    auto d = derotate_observations(std::span<const Observation>(&obs, 1), est.rotation);
    if (d.observations.empty()) {
      ++out.dropped;
      continue;
    }
    out.raw.push_back(obs);
    out.points.push_back({obs.t - est.t_start, d.observations.front().p});
  }
  return out;
}

struct Association {
  std::vector<int> owner;  // line index or -1
  std::size_t ambiguous = 0;
  std::size_t unassigned = 0;
};

// Assigns each point (all at the same time) to the single line whose image
// line is within `radius`.
Association associate(std::span<const Observation> points,
                      std::span<const std::optional<ImageLine>> lines, double radius) {
  Association a;
  a.owner.assign(points.size(), -1);
  for (std::size_t i = 0; i < points.size(); ++i) {
    int hits = 0;
    for (std::size_t l = 0; l < lines.size(); ++l) {
      if (lines[l] && lines[l]->distance(points[i].p) < radius) {
        a.owner[i] = static_cast<int>(l);
        ++hits;
      }
    }
    if (hits == 0) ++a.unassigned;
    if (hits > 1) {
      a.owner[i] = -1;
      ++a.ambiguous;
    }
  }
  return a;
}

std::vector<std::optional<ImageLine>> predicted_rulings(const WindowEstimate& est,
                                                        double t_rel) {
  std::vector<std::optional<ImageLine>> out;
  for (std::size_t l = 0; l < est.params.num_lines(); ++l) {
    out.push_back(predicted_ruling(est, l, t_rel));
  }
  return out;
}

// Rebuilds E from scratch: every raw point is associated with the rulings
// predicted at its own time.
void reassociate(WindowEstimate& est, std::span<const Frame> frames, double radius) {
  const std::size_t m = est.params.num_lines();
  est.points.assign(m, {});
  est.raw_points.assign(m, {});
  est.diagnostics.ambiguous = 0;
  est.diagnostics.unassigned = 0;
  est.diagnostics.dropped = 0;
  for (const auto& frame : frames) {
    const DerotatedFrame d = derotate(frame.points, est);
    est.diagnostics.dropped += d.dropped;
    const auto rulings = predicted_rulings(est, frame.t - est.t_start);
    const Association a = associate(d.points, rulings, radius);
    est.diagnostics.ambiguous += a.ambiguous;
    est.diagnostics.unassigned += a.unassigned;
    for (std::size_t i = 0; i < d.points.size(); ++i) {
      if (a.owner[i] < 0) continue;
      const auto l = static_cast<std::size_t>(a.owner[i]);
      est.points[l].push_back(d.points[i]);
      est.raw_points[l].push_back(d.raw[i]);
    }
  }
}

void solve(WindowEstimate& est, const PipelineConfig& config) {
  std::vector<int> active;
  SurfaceSetParams sub;
  sub.shared = est.params.shared;
  std::vector<std::vector<Observation>> obs;
  for (std::size_t l = 0; l < est.params.num_lines(); ++l) {
    if (est.points[l].empty()) continue;
    active.push_back(static_cast<int>(l));
    sub.lines.push_back(est.params.lines[l]);
    obs.push_back(est.points[l]);
  }
  auto& diag = est.diagnostics;
  diag.active_lines = active;
  if (active.empty()) {
    diag.infeasible = true;
    diag.converged = false;
    diag.termination = "no_points";
    diag.observations = 0;
    return;
  }
  SolverConfig solver = config.solver;
  solver.anchor_weight = config.anchor_weight;
  const WindowSolution sol = solve_window(sub, obs, est.gamma, solver);
  for (std::size_t i = 0; i < active.size(); ++i) {
    est.params.lines[static_cast<std::size_t>(active[i])] = sol.params.lines[i];
  }
  est.params.shared = sol.params.shared;
  const auto& sd = sol.diagnostics;
  diag.loss = sol.final_loss;
  diag.restarts = sd.restarts;
  diag.iterations = sd.iterations;
  diag.attempts = sd.attempts;
  diag.converged = sd.converged;
  diag.infeasible = sd.infeasible;
  diag.unbounded_direction = sd.unbounded_direction;
  diag.termination = sd.termination;
  diag.depth_violation_fraction = sd.depth_violation_fraction;
  diag.observations = sd.observations;
  diag.max_unit_norm_violation = sd.max_unit_norm_violation;
  diag.max_orthogonality_violation = sd.max_orthogonality_violation;
}

void check_gap(const WindowEstimate& est, const Frame& frame, const PipelineConfig& config) {
  const double gap = frame.t - est.frame_times.back();
  if (!(gap > 0.0) || !(gap < config.max_frame_gap)) {
    std::ostringstream os;
    os.precision(17);
    os << "frame at t=" << frame.t << " follows the previous frame by " << gap
       << " s (allowed: (0, " << config.max_frame_gap << "))";
    throw Error(ErrorCode::kFrameGap, os.str());
  }
}

// Extends the window by one frame and associates its points; no solve.
void append_frame(WindowEstimate& est, const Frame& frame, const ImuKinematics& imu,
                  const PipelineConfig& config) {
  check_gap(est, frame, config);
  est.frame_times.push_back(frame.t);
  refresh_tables(est, imu);

  auto& diag = est.diagnostics;
  diag.associated = diag.ambiguous = diag.unassigned = diag.trimmed = 0;
  const DerotatedFrame d = derotate(frame.points, est);
  diag.dropped = d.dropped;
  const auto rulings = predicted_rulings(est, frame.t - est.t_start);
  const Association a = associate(d.points, rulings, config.tau);
  diag.ambiguous = a.ambiguous;
  diag.unassigned = a.unassigned;

  std::vector<bool> gained(est.params.num_lines(), false);
  for (std::size_t i = 0; i < d.points.size(); ++i) {
    if (a.owner[i] < 0) continue;
    const auto l = static_cast<std::size_t>(a.owner[i]);
    est.points[l].push_back(d.points[i]);
    est.raw_points[l].push_back(d.raw[i]);
    gained[l] = true;
    ++diag.associated;
  }
  for (std::size_t l = 0; l < gained.size(); ++l) {
    est.starved_frames[l] = gained[l] ? 0 : est.starved_frames[l] + 1;
  }
}

// Moves the window origin to its second frame: parameters are re-expressed
// at the new origin in the new center frame, old points are trimmed and the
// remaining ones derotated again.
void rebase(WindowEstimate& est, const ImuKinematics& imu) {
  const double t1 = est.frame_times.at(1);
  const double t1_rel = t1 - est.t_start;
  const Quat new_from_old = est.rotation.at(t1);
  const SharedMotionParams& m = est.params.shared;
  const Vec3 shift = translation_at(m, t1_rel, est.gamma.value_at(t1_rel));
  const Vec3 velocity = m.velocity() + est.gamma.rate_at(t1_rel) + t1_rel * m.g;

  for (auto& block : est.params.lines) {
    const LineState line = block.to_line_state();
    block = LineBlock::from_line_state(
        canonicalize_line(new_from_old * (line.x0 + shift), new_from_old * line.v0));
  }
  SharedMotionParams shared;
  shared.set_velocity(new_from_old * velocity);
  shared.g = new_from_old * m.g;
  est.params.shared = shared;

  est.frame_times.erase(est.frame_times.begin());
  est.t_start = t1;
  refresh_tables(est, imu);

  std::size_t trimmed = 0;
  for (std::size_t l = 0; l < est.raw_points.size(); ++l) {
    auto& raw = est.raw_points[l];
    const auto before = raw.size();
    std::erase_if(raw, [t1](const Observation& o) { return o.t < t1; });
    trimmed += before - raw.size();
    const DerotatedFrame d = derotate(raw, est);
    raw = d.raw;
    est.points[l] = d.points;
    est.diagnostics.dropped += d.dropped;
  }
  est.diagnostics.trimmed = trimmed;
}

}  // namespace

WindowEstimate start_window(std::span<const Frame> frames, const SurfaceSetParams& init,
                            const ImuKinematics& imu, const PipelineConfig& config,
                            double radius) {
  if (frames.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "a window needs at least one frame");
  }
  WindowEstimate est;
  est.t_start = frames.front().t;
  for (const auto& f : frames) est.frame_times.push_back(f.t);
  est.params = retract(init);
  est.starved_frames.assign(init.num_lines(), 0);
  refresh_tables(est, imu);

  reassociate(est, frames, radius);
  solve(est, config);
  if (!est.diagnostics.infeasible) {
    reassociate(est, frames, config.tau);
    solve(est, config);
  }
  std::size_t total = 0;
  for (const auto& p : est.points) total += p.size();
  est.diagnostics.associated = total;
  return est;
}

WindowEstimate extrude_surface(WindowEstimate est, const Frame& frame,
                               const ImuKinematics& imu, const PipelineConfig& config) {
  append_frame(est, frame, imu, config);
  solve(est, config);
  return est;
}

WindowEstimate slide_window(WindowEstimate est, const Frame& frame,
                            const ImuKinematics& imu, const PipelineConfig& config) {
  append_frame(est, frame, imu, config);
  est.diagnostics.dropped = 0;
  rebase(est, imu);
  solve(est, config);
  return est;
}

namespace {

void validate_input(const PipelineInput& input) {
  if (input.frames.empty()) {
    throw Error(ErrorCode::kInputError, "no frames to process");
  }
  for (std::size_t i = 1; i < input.frames.size(); ++i) {
    if (!(input.frames[i].t > input.frames[i - 1].t)) {
      throw Error(ErrorCode::kInputError, "frame times must be strictly increasing");
    }
  }
  if (input.imu.size() < 2 || !input.imu.covers(input.frames.front().t) ||
      !input.imu.covers(input.frames.back().t)) {
    throw Error(ErrorCode::kInputError, "IMU data does not cover the frame time span");
  }
}

// Start window for a detection-based run: inliers come from the detected
// image lines taken as static over the initial interval.
WindowEstimate start_from_detections(std::span<const Frame> frames,
                                     const std::vector<LineDetection>& detections,
                                     const ImuKinematics& imu,
                                     const PipelineConfig& config) {
  WindowEstimate est;
  est.t_start = frames.front().t;
  for (const auto& f : frames) est.frame_times.push_back(f.t);
  est.params = init_surface_params(detections, config.a_init, config.g_init);
  est.starved_frames.assign(detections.size(), 0);
  refresh_tables(est, imu);

  std::vector<std::optional<ImageLine>> lines;
  for (const auto& d : detections) lines.emplace_back(d.line);
  est.points.assign(lines.size(), {});
  est.raw_points.assign(lines.size(), {});
  for (const auto& frame : frames) {
    const DerotatedFrame d = derotate(frame.points, est);
    const Association a = associate(d.points, lines, config.detection.inlier_radius);
    for (std::size_t i = 0; i < d.points.size(); ++i) {
      if (a.owner[i] < 0) continue;
      const auto l = static_cast<std::size_t>(a.owner[i]);
      est.points[l].push_back(d.points[i]);
      est.raw_points[l].push_back(d.raw[i]);
    }
  }
  solve(est, config);
  if (!est.diagnostics.infeasible) {
    reassociate(est, frames, config.tau);
    solve(est, config);
  }
  return est;
}

}  // namespace

PipelineResult run_pipeline(const PipelineInput& input, const PipelineConfig& config,
                            const WindowCallback& on_window) {
  validate_input(input);
  if (config.window_frames < 1) {
    throw Error(ErrorCode::kInvalidArgument, "window_frames must be at least 1");
  }
  const ImuKinematics imu(input.imu, config.derotate);
  const auto& frames = input.frames;
  const double t0 = frames.front().t;

  std::size_t n_init = 0;
  while (n_init < frames.size() && frames[n_init].t <= t0 + config.init_interval) ++n_init;
  const std::span<const Frame> init_frames(frames.data(), n_init);

  PipelineResult result;
  WindowEstimate est;
  if (input.initial_params) {
    est = start_window(init_frames, *input.initial_params, imu, config, config.tau);
  } else {
    DetectionConfig det = config.detection;
    if (!input.init_rasters.empty()) {
      result.detections = detect_initial_lines(input.init_rasters, input.intrinsics, det);
    } else {
      const RotationTable rot = imu.rotations(t0, init_frames.back().t);
      std::vector<Observation> pooled;
      for (const auto& f : init_frames) {
        auto d = derotate_observations(f.points, rot);
        pooled.insert(pooled.end(), d.observations.begin(), d.observations.end());
      }
      result.detections = detect_initial_lines(pooled, input.intrinsics, det);
    }
    est = start_from_detections(init_frames, result.detections, imu, config);
  }

  OdometryAccumulator odometry;
  std::vector<bool> warned(est.params.num_lines(), false);
  const std::size_t full = static_cast<std::size_t>(config.window_frames) + 1;

  auto emit = [&](const WindowEstimate& w) {
    WindowRecord rec;
    rec.t_start = w.t_start;
    rec.t_end = w.t_end;
    rec.frames = w.num_frames();
    for (const auto& p : w.points) rec.points_per_line.push_back(p.size());
    rec.diagnostics = w.diagnostics;
    result.records.push_back(std::move(rec));
    if (w.diagnostics.infeasible) {
      result.infeasible = true;
      return;
    }
    WindowSummary s = w.summary();
    odometry.add(s);
    result.windows.push_back(std::move(s));
    if (on_window) on_window(w);
  };
  auto check_starvation = [&](const WindowEstimate& w) {
    for (std::size_t l = 0; l < w.starved_frames.size(); ++l) {
      if (!warned[l] && w.starved_frames[l] > config.starvation_limit) {
        std::ostringstream os;
        os.precision(6);
        os << "line " << l << " received no points for " << w.starved_frames[l]
           << " consecutive frames (t=" << w.t_end << ")";
        result.warnings.push_back(os.str());
        warned[l] = true;
      }
    }
  };

  bool emitted = false;
  if (est.diagnostics.infeasible) {
    emit(est);
  } else {
    if (est.num_frames() >= full) {
      emit(est);
      emitted = true;
    }
    for (std::size_t i = n_init; i < frames.size() && !result.infeasible; ++i) {
      const Frame& frame = frames[i];
      const bool slide = est.num_frames() >= full ||
                         frame.t - est.t_start > config.max_window_span;
      if (slide) {
        if (!emitted) {
          emit(est);
          emitted = true;
          if (result.infeasible) break;
        }
        est = slide_window(std::move(est), frame, imu, config);
        emit(est);
      } else {
        est = extrude_surface(std::move(est), frame, imu, config);
        if (est.num_frames() >= full || est.diagnostics.infeasible) {
          emit(est);
          emitted = true;
        }
      }
      check_starvation(est);
    }
    if (!emitted && !result.infeasible) emit(est);
  }
  result.odometry = odometry.result();
  return result;
}

}  // namespace ruledvo
