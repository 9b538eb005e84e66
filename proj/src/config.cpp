#include "ruledvo/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "ruledvo/errors.hpp"

namespace ruledvo {
namespace {

[[noreturn]] void invalid(const std::string& field, const std::string& what) {
  throw Error(ErrorCode::kInvalidArgument, field + ": " + what);
}

Json vec_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

// Walks one JSON object, reading known keys into place. Anything left over
// at finish() is an unknown key.
class Reader {
 public:
  Reader(const Json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {
    if (!j_.is_object()) invalid(name(""), "expected an object");
  }

  std::string name(const std::string& key) const {
    if (prefix_.empty()) return key.empty() ? "config" : key;
    return key.empty() ? prefix_ : prefix_ + "." + key;
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <class T>
  void get(const std::string& key, T& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    const Json& v = j_.at(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) invalid(name(key), "expected true or false");
      out = v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) invalid(name(key), "expected a string");
      out = v.get<std::string>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) invalid(name(key), "expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0) {
          invalid(name(key), "must be >= 0");
        }
      }
      out = v.get<T>();
    } else {
      if (!v.is_number()) invalid(name(key), "expected a number");
      out = v.get<T>();
    }
  }

  void vec3(const std::string& key, Vec3& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    const Json& v = j_.at(key);
    if (!v.is_array() || v.size() != 3) invalid(name(key), "expected [x, y, z]");
    for (int i = 0; i < 3; ++i) {
      if (!v[static_cast<std::size_t>(i)].is_number()) {
        invalid(name(key), "expected [x, y, z]");
      }
      out[i] = v[static_cast<std::size_t>(i)].get<double>();
    }
  }

  const Json* child(const std::string& key) {
    if (!j_.contains(key)) return nullptr;
    seen_.insert(key);
    return &j_.at(key);
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) invalid(name(key), "unknown key");
    }
  }

 private:
  const Json& j_;
  std::string prefix_;
  std::set<std::string> seen_;
};

Json to_json(const HoughConfig& c) {
  return {{"rho_resolution", c.rho_resolution},
          {"theta_resolution_deg", c.theta_resolution_deg},
          {"vote_threshold", c.vote_threshold},
          {"min_line_length", c.min_line_length},
          {"max_line_gap", c.max_line_gap},
          {"max_candidates", c.max_candidates}};
}

void read(Reader r, HoughConfig& c) {
  r.get("rho_resolution", c.rho_resolution);
  r.get("theta_resolution_deg", c.theta_resolution_deg);
  r.get("vote_threshold", c.vote_threshold);
  r.get("min_line_length", c.min_line_length);
  r.get("max_line_gap", c.max_line_gap);
  r.get("max_candidates", c.max_candidates);
  r.finish();
  if (!(c.rho_resolution > 0.0)) invalid(r.name("rho_resolution"), "must be positive");
  if (!(c.theta_resolution_deg > 0.0)) {
    invalid(r.name("theta_resolution_deg"), "must be positive");
  }
  if (c.vote_threshold < 1) invalid(r.name("vote_threshold"), "must be at least 1");
  if (c.max_candidates < 1) invalid(r.name("max_candidates"), "must be at least 1");
}

Json to_json(const DetectionConfig& c) {
  return {{"num_lines", c.num_lines},
          {"edge_threshold", c.edge_threshold},
          {"median_prefilter", c.median_prefilter},
          {"suppression_radius", c.suppression_radius},
          {"inlier_radius", c.inlier_radius},
          {"hough", to_json(c.hough)}};
}

void read(Reader r, DetectionConfig& c) {
  r.get("num_lines", c.num_lines);
  r.get("edge_threshold", c.edge_threshold);
  r.get("median_prefilter", c.median_prefilter);
  r.get("suppression_radius", c.suppression_radius);
  r.get("inlier_radius", c.inlier_radius);
  if (const Json* h = r.child("hough")) read(Reader(*h, r.name("hough")), c.hough);
  r.finish();
  if (c.num_lines < 1) invalid(r.name("num_lines"), "must be at least 1");
  if (!(c.suppression_radius > 0.0)) {
    invalid(r.name("suppression_radius"), "must be positive");
  }
  if (!(c.inlier_radius > 0.0)) invalid(r.name("inlier_radius"), "must be positive");
}

Json to_json(const SolverConfig& c) {
  return {{"max_iterations", c.max_iterations},
          {"gradient_tolerance", c.gradient_tolerance},
          {"step_tolerance", c.step_tolerance},
          {"function_tolerance", c.function_tolerance},
          {"initial_damping", c.initial_damping},
          {"restart_threshold", c.restart_threshold},
          {"max_restarts", c.max_restarts},
          {"sigma_line", c.sigma_line},
          {"sigma_velocity", c.sigma_velocity},
          {"sigma_gravity", c.sigma_gravity},
          {"penalty_residual", c.penalty_residual},
          {"max_depth_violation_fraction", c.max_depth_violation_fraction},
          {"max_gravity_norm", c.max_gravity_norm},
          {"seed", c.seed}};
}

void read(Reader r, SolverConfig& c) {
  r.get("max_iterations", c.max_iterations);
  r.get("gradient_tolerance", c.gradient_tolerance);
  r.get("step_tolerance", c.step_tolerance);
  r.get("function_tolerance", c.function_tolerance);
  r.get("initial_damping", c.initial_damping);
  r.get("restart_threshold", c.restart_threshold);
  r.get("max_restarts", c.max_restarts);
  r.get("sigma_line", c.sigma_line);
  r.get("sigma_velocity", c.sigma_velocity);
  r.get("sigma_gravity", c.sigma_gravity);
  r.get("penalty_residual", c.penalty_residual);
  r.get("max_depth_violation_fraction", c.max_depth_violation_fraction);
  r.get("max_gravity_norm", c.max_gravity_norm);
  r.get("seed", c.seed);
  r.finish();
  if (c.max_iterations < 0) invalid(r.name("max_iterations"), "must be >= 0");
  if (c.max_restarts < 0) invalid(r.name("max_restarts"), "must be >= 0");
  if (!(c.initial_damping > 0.0)) invalid(r.name("initial_damping"), "must be positive");
}

Json line_json(const LineState& l) {
  return {{"x0", vec_json(l.x0)}, {"v0", vec_json(l.v0)}};
}

}  // namespace

Json to_json(const PipelineConfig& c) {
  return {{"window_frames", c.window_frames},
          {"max_window_span", c.max_window_span},
          {"init_interval", c.init_interval},
          {"max_frame_gap", c.max_frame_gap},
          {"tau", c.tau},
          {"a_init", c.a_init},
          {"g_init", vec_json(c.g_init)},
          {"starvation_limit", c.starvation_limit},
          {"derotate", c.derotate},
          {"anchor_weight", c.anchor_weight},
          {"detection", to_json(c.detection)},
          {"solver", to_json(c.solver)}};
}

PipelineConfig pipeline_config_from_json(const Json& j, PipelineConfig c) {
  Reader r(j, "");
  r.get("window_frames", c.window_frames);
  r.get("max_window_span", c.max_window_span);
  r.get("init_interval", c.init_interval);
  r.get("max_frame_gap", c.max_frame_gap);
  r.get("tau", c.tau);
  r.get("a_init", c.a_init);
  r.vec3("g_init", c.g_init);
  r.get("starvation_limit", c.starvation_limit);
  r.get("derotate", c.derotate);
  r.get("anchor_weight", c.anchor_weight);
  if (const Json* d = r.child("detection")) read(Reader(*d, "detection"), c.detection);
  if (const Json* s = r.child("solver")) read(Reader(*s, "solver"), c.solver);
  // Shorthands for the knobs people change most.
  if (const Json* s = r.child("seed")) {
    Json wrapped = {{"seed", *s}};
    Reader(wrapped, "").get("seed", c.solver.seed);
  }
  if (const Json* m = r.child("num_lines")) {
    Json wrapped = {{"num_lines", *m}};
    Reader(wrapped, "").get("num_lines", c.detection.num_lines);
  }
  r.finish();
  if (c.window_frames < 1) invalid("window_frames", "must be at least 1");
  if (!(c.max_window_span > 0.0)) invalid("max_window_span", "must be positive");
  if (!(c.init_interval >= 0.0)) invalid("init_interval", "must be >= 0");
  if (!(c.max_frame_gap > 0.0)) invalid("max_frame_gap", "must be positive");
  if (!(c.tau > 0.0)) invalid("tau", "must be positive");
  if (!(c.a_init > 0.0)) invalid("a_init", "must be positive");
  if (!(c.anchor_weight >= 0.0)) invalid("anchor_weight", "must be >= 0");
  return c;
}

Json to_json(const Intrinsics& k) {
  return {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx},
          {"cy", k.cy}, {"width", k.width}, {"height", k.height}};
}

Intrinsics intrinsics_from_json(const Json& j) {
  Intrinsics k;
  Reader r(j, "intrinsics");
  r.get("fx", k.fx);
  r.get("fy", k.fy);
  r.get("cx", k.cx);
  r.get("cy", k.cy);
  r.get("width", k.width);
  r.get("height", k.height);
  r.finish();
  if (!(k.fx > 0.0) || !(k.fy > 0.0)) invalid("intrinsics", "focal lengths must be positive");
  if (k.width < 2 || k.height < 2) invalid("intrinsics", "image size too small");
  return k;
}

Json to_json(const ScenarioSpec& s) {
  Json lines = Json::array();
  for (const auto& l : s.lines) lines.push_back(line_json(l));
  Json waypoints = Json::array();
  for (const auto& w : s.trajectory.waypoints) {
    waypoints.push_back({{"t", w.t}, {"position", vec_json(w.position)}});
  }
  Json trajectory = {{"type", to_string(s.trajectory.kind)},
                     {"amplitude", s.trajectory.amplitude},
                     {"period", s.trajectory.period},
                     {"corner_blend", s.trajectory.corner_blend},
                     {"dwell", s.trajectory.dwell}};
  if (!waypoints.empty()) trajectory["waypoints"] = waypoints;
  return {{"duration", s.duration},
          {"fps", s.fps},
          {"imu_rate", s.imu_rate},
          {"seed", s.seed},
          {"trajectory", trajectory},
          {"rotation",
           {{"axis", to_string(s.rotation.axis)},
            {"rate", s.rotation.rate},
            {"period", s.rotation.period}}},
          {"noise",
           {{"accel_sigma", s.noise.accel_sigma},
            {"gyro_sigma", s.noise.gyro_sigma},
            {"accel_bias", vec_json(s.noise.accel_bias)},
            {"gravity", vec_json(s.noise.gravity)}}},
          {"obs_noise", s.obs_noise},
          {"outlier_fraction", s.outlier_fraction},
          {"points_per_line", s.points_per_line},
          {"max_alpha", s.max_alpha},
          {"min_depth", s.min_depth},
          {"lines", lines},
          {"intrinsics", to_json(s.intrinsics)},
          {"raster",
           {{"enabled", s.raster.enabled},
            {"background", s.raster.background},
            {"foreground", s.raster.foreground},
            {"salt_fraction", s.raster.salt_fraction}}}};
}

ScenarioSpec scenario_from_json(const Json& j) {
  ScenarioSpec s;
  Reader r(j, "");
  r.get("duration", s.duration);
  r.get("fps", s.fps);
  r.get("imu_rate", s.imu_rate);
  r.get("seed", s.seed);
  r.get("obs_noise", s.obs_noise);
  r.get("outlier_fraction", s.outlier_fraction);
  r.get("points_per_line", s.points_per_line);
  r.get("max_alpha", s.max_alpha);
  r.get("min_depth", s.min_depth);
  if (const Json* t = r.child("trajectory")) {
    Reader tr(*t, "trajectory");
    std::string type = to_string(s.trajectory.kind);
    tr.get("type", type);
    try {
      s.trajectory.kind = trajectory_kind_from_string(type);
    } catch (const Error& e) {
      invalid("trajectory.type", e.what());
    }
    tr.get("amplitude", s.trajectory.amplitude);
    tr.get("period", s.trajectory.period);
    tr.get("corner_blend", s.trajectory.corner_blend);
    tr.get("dwell", s.trajectory.dwell);
    if (const Json* w = tr.child("waypoints")) {
      if (!w->is_array()) invalid("trajectory.waypoints", "expected a list");
      for (std::size_t i = 0; i < w->size(); ++i) {
        Reader wr((*w)[i], "trajectory.waypoints[" + std::to_string(i) + "]");
        Waypoint p;
        wr.get("t", p.t);
        wr.vec3("position", p.position);
        wr.finish();
        s.trajectory.waypoints.push_back(p);
      }
    }
    tr.finish();
  }
  if (const Json* rot = r.child("rotation")) {
    Reader rr(*rot, "rotation");
    std::string axis = to_string(s.rotation.axis);
    rr.get("axis", axis);
    try {
      s.rotation.axis = rotation_axis_from_string(axis);
    } catch (const Error& e) {
      invalid("rotation.axis", e.what());
    }
    rr.get("rate", s.rotation.rate);
    rr.get("period", s.rotation.period);
    rr.finish();
  }
  if (const Json* n = r.child("noise")) {
    Reader nr(*n, "noise");
    nr.get("accel_sigma", s.noise.accel_sigma);
    nr.get("gyro_sigma", s.noise.gyro_sigma);
    nr.vec3("accel_bias", s.noise.accel_bias);
    nr.vec3("gravity", s.noise.gravity);
    nr.finish();
  }
  if (const Json* l = r.child("lines")) {
    if (!l->is_array()) invalid("lines", "expected a list");
    for (std::size_t i = 0; i < l->size(); ++i) {
      Reader lr((*l)[i], "lines[" + std::to_string(i) + "]");
      LineState line;
      line.v0 = Vec3::Zero();
      lr.vec3("x0", line.x0);
      lr.vec3("v0", line.v0);
      lr.finish();
      s.lines.push_back(line);
    }
  }
  if (const Json* k = r.child("intrinsics")) s.intrinsics = intrinsics_from_json(*k);
  if (const Json* ra = r.child("raster")) {
    Reader rr(*ra, "raster");
    rr.get("enabled", s.raster.enabled);
    rr.get("background", s.raster.background);
    rr.get("foreground", s.raster.foreground);
    rr.get("salt_fraction", s.raster.salt_fraction);
    rr.finish();
  }
  r.finish();
  validate(s);
  return s;
}

void apply_overrides(Json& j, const std::vector<std::string>& assignments) {
  for (const auto& a : assignments) {
    const auto eq = a.find('=');
    if (eq == std::string::npos || eq == 0) {
      invalid(a, "expected key=value");
    }
    const std::string key = a.substr(0, eq);
    const std::string text = a.substr(eq + 1);
    Json value = Json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    Json* node = &j;
    std::size_t start = 0;
    while (true) {
      const auto dot = key.find('.', start);
      const std::string part = key.substr(start, dot - start);
      if (part.empty()) invalid(key, "empty path component");
      if (!node->is_object()) invalid(key, "path does not name an object");
      node = &(*node)[part];
      if (dot == std::string::npos) break;
      start = dot + 1;
    }
    *node = value;
  }
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kInputError, path + ": cannot open");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kInputError, path + ": " + e.what());
  }
}

}  // namespace ruledvo
