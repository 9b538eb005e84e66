#include "ruledvo/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "ruledvo/dataset.hpp"
#include "ruledvo/errors.hpp"

namespace ruledvo {
namespace fs = std::filesystem;
namespace {

Json stats_json(const AxisStats& s) { return {{"mean", s.mean}, {"std", s.std}}; }

AxisStats stats_from(const Json& j) {
  return {j.at("mean").get<double>(), j.at("std").get<double>()};
}

int exit_code_for(const Error& e) {
  return e.code() == ErrorCode::kNotEnoughLines ? kExitDetection : kExitInput;
}

std::string vec_cells(const Vec3& v) {
  return format_number(v.x()) + "," + format_number(v.y()) + "," + format_number(v.z());
}

Json window_json(std::size_t index, const WindowRecord& r) {
  const auto& d = r.diagnostics;
  return {{"index", index},
          {"t_start", r.t_start},
          {"t_end", r.t_end},
          {"frames", r.frames},
          {"points_per_line", r.points_per_line},
          {"active_lines", d.active_lines},
          {"loss", d.loss},
          {"restarts", d.restarts},
          {"iterations", d.iterations},
          {"attempts", d.attempts},
          {"converged", d.converged},
          {"infeasible", d.infeasible},
          {"unbounded_direction", d.unbounded_direction},
          {"termination", d.termination},
          {"depth_violation_fraction", d.depth_violation_fraction},
          {"observations", d.observations},
          {"associated", d.associated},
          {"ambiguous", d.ambiguous},
          {"unassigned", d.unassigned},
          {"dropped", d.dropped},
          {"trimmed", d.trimmed},
          {"max_unit_norm_violation", d.max_unit_norm_violation},
          {"max_orthogonality_violation", d.max_orthogonality_violation}};
}

struct EstimatedLineRow {
  double t_start = 0.0;
  int line = 0;
  LineState center;
  LineState basis;
};

const std::vector<std::string> kLinesHeader = {
    "t_start", "line", "x0x", "x0y", "x0z", "v0x", "v0y", "v0z",
    "bx0x",    "bx0y", "bx0z", "bv0x", "bv0y", "bv0z"};

std::vector<EstimatedLineRow> read_lines_csv(const fs::path& path) {
  std::vector<EstimatedLineRow> rows;
  for (const auto& r : read_numeric_csv(path, kLinesHeader)) {
    EstimatedLineRow row;
    row.t_start = r[0];
    row.line = static_cast<int>(r[1]);
    row.center = {Vec3(r[2], r[3], r[4]), Vec3(r[5], r[6], r[7])};
    row.basis = {Vec3(r[8], r[9], r[10]), Vec3(r[11], r[12], r[13])};
    rows.push_back(row);
  }
  return rows;
}

const CameraPose& pose_near(const GroundTruth& truth, double t) {
  auto it = std::lower_bound(truth.poses.begin(), truth.poses.end(), t,
                             [](const CameraPose& p, double v) { return p.t < v; });
  if (it == truth.poses.end()) return truth.poses.back();
  if (it != truth.poses.begin() && t - (it - 1)->t < it->t - t) return *(it - 1);
  return *it;
}

LineState truth_in_camera(const GroundTruth& truth, std::size_t line, double t) {
  const CameraPose& p = pose_near(truth, t);
  const Quat cw = p.world_from_cam.conjugate();
  const LineState& w = truth.world_lines.at(line);
  return canonicalize_line(cw * (w.x0 - p.position), cw * w.v0);
}

// Three stacked panels, estimate against truth, one per axis.
std::string trajectory_svg(const std::vector<double>& t, const std::vector<Vec3>& est,
                           const std::vector<Vec3>& truth) {
  const double width = 800, panel = 200, margin = 40;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
     << 3 * panel + margin << "\">\n";
  const char* names[3] = {"X", "Y", "Z"};
  const double t0 = t.front(), t1 = std::max(t.back(), t0 + 1e-9);
  for (int axis = 0; axis < 3; ++axis) {
    double lo = 1e300, hi = -1e300;
    for (std::size_t i = 0; i < t.size(); ++i) {
      lo = std::min({lo, est[i][axis], truth[i][axis]});
      hi = std::max({hi, est[i][axis], truth[i][axis]});
    }
    if (hi - lo < 1e-6) {
      lo -= 0.5e-6;
      hi += 0.5e-6;
    }
    const double top = axis * panel + margin / 2;
    auto polyline = [&](const std::vector<Vec3>& p, const char* color) {
      os << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"";
      for (std::size_t i = 0; i < t.size(); ++i) {
        const double x = margin + (t[i] - t0) / (t1 - t0) * (width - 2 * margin);
        const double y = top + (1.0 - (p[i][axis] - lo) / (hi - lo)) * (panel - margin);
        os << x << "," << y << " ";
      }
      os << "\"/>\n";
    };
    os << "<text x=\"5\" y=\"" << top + 15 << "\">" << names[axis] << " (m)</text>\n";
    polyline(truth, "black");
    polyline(est, "steelblue");
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace

Json to_json(const RunReport& r) {
  Json j;
  j["trajectory"] = {{"X", stats_json(r.trajectory.x)},
                     {"Y", stats_json(r.trajectory.y)},
                     {"Z", stats_json(r.trajectory.z)},
                     {"samples", r.trajectory.samples}};
  Json lines = Json::array();
  for (const auto& l : r.lines) {
    lines.push_back({{"line", l.line},
                     {"truth_line", l.truth_line},
                     {"distance", stats_json(l.distance)}});
  }
  j["lines"] = lines;
  j["windows"] = {{"count", r.windows.count},         {"mean_loss", r.windows.mean_loss},
                  {"max_loss", r.windows.max_loss},   {"restarts", r.windows.restarts},
                  {"ambiguous", r.windows.ambiguous}, {"unassigned", r.windows.unassigned},
                  {"dropped", r.windows.dropped}};
  j["timing"] = {{"estimate_seconds",
                  r.estimate_seconds ? Json(*r.estimate_seconds) : Json(nullptr)}};
  return j;
}

RunReport run_report_from_json(const Json& j) {
  RunReport r;
  try {
    const Json& t = j.at("trajectory");
    r.trajectory.x = stats_from(t.at("X"));
    r.trajectory.y = stats_from(t.at("Y"));
    r.trajectory.z = stats_from(t.at("Z"));
    r.trajectory.samples = t.at("samples").get<std::size_t>();
    for (const auto& l : j.at("lines")) {
      r.lines.push_back({l.at("line").get<int>(), l.at("truth_line").get<int>(),
                         stats_from(l.at("distance"))});
    }
    const Json& w = j.at("windows");
    r.windows.count = w.at("count").get<std::size_t>();
    r.windows.mean_loss = w.at("mean_loss").get<double>();
    r.windows.max_loss = w.at("max_loss").get<double>();
    r.windows.restarts = w.at("restarts").get<long>();
    r.windows.ambiguous = w.at("ambiguous").get<long>();
    r.windows.unassigned = w.at("unassigned").get<long>();
    r.windows.dropped = w.at("dropped").get<long>();
    const Json& s = j.at("timing").at("estimate_seconds");
    if (!s.is_null()) r.estimate_seconds = s.get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInputError, std::string("report: ") + e.what());
  }
  return r;
}

int cmd_simulate(const std::string& spec_path, const std::string& out_dir, std::ostream& out,
                 std::ostream& err) {
  try {
    const ScenarioSpec spec = scenario_from_json(read_json_file(spec_path));
    const SyntheticData data = synthesize(spec);
    PipelineConfig config;
    config.solver.seed = spec.seed;
    write_dataset(out_dir, spec, data, config);
    out << "wrote " << data.frames.size() << " frames and " << data.imu.size()
        << " IMU samples to " << out_dir << "\n";
    return kExitOk;
  } catch (const Error& e) {
    err << "error: " << spec_path << ": " << e.what() << "\n";
    return kExitInput;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }
}

int cmd_estimate(const std::string& dataset_dir, const EstimateOptions& options,
                 const std::string& out_dir, std::ostream& out, std::ostream& err) {
  const auto start = std::chrono::steady_clock::now();
  Dataset ds;
  PipelineConfig config;
  PipelineInput input;
  try {
    ds = load_dataset(dataset_dir);
    Json cj = ds.config.is_object() ? ds.config : Json::object();
    if (!options.config_file.empty()) cj.merge_patch(read_json_file(options.config_file));
    apply_overrides(cj, options.overrides);
    config = pipeline_config_from_json(cj);

    input.imu = ds.imu;
    input.intrinsics = ds.intrinsics;
    if (ds.has_observations()) {
      input.frames = ds.frames;
    } else {
      // Raster-only dataset: the edge pixels of each frame are its points.
      for (std::size_t i = 0; i < ds.rasters.size(); ++i) {
        GrayImage image = ds.load_raster(i);
        if (config.detection.median_prefilter) image = median_filter3(image);
        input.frames.push_back({ds.rasters[i].t, harvest_edge_points(image, ds.rasters[i].t,
                                                                     ds.intrinsics,
                                                                     config.detection)});
      }
    }
    if (input.frames.empty()) throw Error(ErrorCode::kInputError, "dataset has no frames");
    const double t0 = input.frames.front().t;
    for (std::size_t i = 0; i < ds.rasters.size(); ++i) {
      if (ds.rasters[i].t > t0 + config.init_interval) break;
      if (ds.rasters[i].t < t0) continue;
      input.init_rasters.push_back({ds.rasters[i].t, ds.load_raster(i)});
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }

  const fs::path dir(out_dir);
  Json run = {{"dataset", dataset_dir}, {"config", to_json(config)}};
  auto finish_run = [&](const std::string& status) {
    run["status"] = status;
    run["elapsed_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    fs::create_directories(dir);
    write_file_atomic(dir / "run.json", run.dump(2) + "\n");
  };

  PipelineResult result;
  try {
    result = run_pipeline(input, config);
  } catch (const Error& e) {
    run["error"] = e.what();
    run["error_code"] = to_string(e.code());
    try {
      finish_run(e.code() == ErrorCode::kNotEnoughLines ? "detection_failed" : "input_error");
    } catch (const std::exception& w) {
      err << "error: " << w.what() << "\n";
    }
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }

  try {
    fs::create_directories(dir);
    const auto& odo = result.odometry;
    std::string traj = "t,x,y,z\n";
    for (std::size_t i = 0; i < odo.timestamps.size(); ++i) {
      traj += format_number(odo.timestamps[i]) + "," + vec_cells(odo.positions[i]) + "\n";
    }
    write_file_atomic(dir / "trajectory.csv", traj);

    std::string lines;
    for (std::size_t i = 0; i < kLinesHeader.size(); ++i) {
      lines += (i ? "," : "") + kLinesHeader[i];
    }
    lines += "\n";
    for (std::size_t w = 0; w < odo.window_starts.size(); ++w) {
      for (std::size_t l = 0; l < odo.window_lines[w].size(); ++l) {
        const LineState& c = odo.window_lines[w][l];
        const LineState& b = odo.window_lines_basis[w][l];
        lines += format_number(odo.window_starts[w]) + "," + std::to_string(l) + "," +
                 vec_cells(c.x0) + "," + vec_cells(c.v0) + "," + vec_cells(b.x0) + "," +
                 vec_cells(b.v0) + "\n";
      }
    }
    write_file_atomic(dir / "lines.csv", lines);

    std::string jsonl;
    for (std::size_t i = 0; i < result.records.size(); ++i) {
      jsonl += window_json(i, result.records[i]).dump() + "\n";
    }
    write_file_atomic(dir / "windows.jsonl", jsonl);

    Json detections = Json::array();
    for (const auto& d : result.detections) {
      detections.push_back({{"rho_px", d.pixel_line.rho},
                            {"theta_rad", d.pixel_line.theta},
                            {"votes", d.pixel_line.votes},
                            {"inliers", d.inliers.size()}});
    }
    run["frames"] = input.frames.size();
    run["windows"] = result.records.size();
    run["trajectory_samples"] = odo.timestamps.size();
    run["detections"] = detections;
    run["warnings"] = result.warnings;
    finish_run(result.infeasible ? "infeasible" : "ok");
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }

  for (const auto& w : result.warnings) err << "warning: " << w << "\n";
  out << "windows: " << result.records.size() << ", trajectory samples: "
      << result.odometry.timestamps.size() << "\n";
  if (result.infeasible) {
    err << "error: window " << result.records.size() - 1
        << " is infeasible after the maximum number of restarts\n";
    return kExitInfeasible;
  }
  return kExitOk;
}

int cmd_evaluate(const std::string& estimate_dir, const std::string& truth_source,
                 const EvaluateOptions& options, std::ostream& out, std::ostream& err) {
  try {
    const fs::path est_dir(estimate_dir);
    fs::path truth_path(truth_source);
    if (fs::is_directory(truth_path)) truth_path /= "truth.json";
    const GroundTruth truth = truth_from_json(read_json_file(truth_path.string()));
    if (truth.poses.empty()) throw Error(ErrorCode::kInputError, "truth has no frames");

    TimedPositions estimate;
    for (const auto& r : read_numeric_csv(est_dir / "trajectory.csv", {"t", "x", "y", "z"})) {
      estimate.t.push_back(r[0]);
      estimate.p.emplace_back(r[1], r[2], r[3]);
    }
    TimedPositions true_track;
    for (const auto& p : truth.poses) {
      true_track.t.push_back(p.t);
      true_track.p.push_back(p.position);
    }

    RunReport report;
    report.trajectory = evaluate_trajectory(estimate, true_track);

    const fs::path out_dir = options.out_dir.empty() ? est_dir : fs::path(options.out_dir);
    fs::create_directories(out_dir);

    // Trajectory plot data at the truth times the estimate covers.
    std::vector<double> pt;
    std::vector<Vec3> pe, ptrue;
    std::string traj = "t,est_x,est_y,est_z,true_x,true_y,true_z\n";
    for (std::size_t i = 0; i < true_track.t.size(); ++i) {
      const double t = true_track.t[i];
      if (t < estimate.t.front() - 1e-9 || t > estimate.t.back() + 1e-9) continue;
      const Vec3 e =
          interpolate(estimate, std::clamp(t, estimate.t.front(), estimate.t.back()));
      pt.push_back(t);
      pe.push_back(e);
      ptrue.push_back(true_track.p[i]);
      traj += format_number(t) + "," + vec_cells(e) + "," + vec_cells(true_track.p[i]) + "\n";
    }
    write_file_atomic(out_dir / "plot_trajectory.csv", traj);
    if (options.svg && !pt.empty()) {
      write_file_atomic(out_dir / "plot_trajectory.svg", trajectory_svg(pt, pe, ptrue));
    }

    if (fs::exists(est_dir / "lines.csv") && !truth.world_lines.empty()) {
      const auto rows = read_lines_csv(est_dir / "lines.csv");
      // Estimated lines keep their detection order; pair each with the
      // closest true line in the first window.
      std::map<int, int> match;
      for (const auto& r : rows) {
        if (r.t_start != rows.front().t_start) break;
        int best = 0;
        double best_d = 1e300;
        for (std::size_t k = 0; k < truth.world_lines.size(); ++k) {
          const double d = mean_line_distance(truth.world_lines[k], r.basis);
          if (d < best_d) {
            best_d = d;
            best = static_cast<int>(k);
          }
        }
        match[r.line] = best;
      }
      std::map<int, std::vector<double>> dist;
      std::string directrix = "t_start,line,x,y,z,true_x,true_y,true_z\n";
      std::string ruling = "t_start,line,x,y,z,true_x,true_y,true_z\n";
      for (const auto& r : rows) {
        if (!match.count(r.line)) continue;
        const auto k = static_cast<std::size_t>(match[r.line]);
        dist[r.line].push_back(mean_line_distance(truth.world_lines[k], r.basis));
        const LineState tl = truth_in_camera(truth, k, r.t_start);
        const std::string head = format_number(r.t_start) + "," + std::to_string(r.line) + ",";
        directrix += head + vec_cells(r.center.x0) + "," + vec_cells(tl.x0) + "\n";
        ruling += head + vec_cells(r.center.v0) + "," + vec_cells(tl.v0) + "\n";
      }
      for (const auto& [line, d] : dist) {
        report.lines.push_back({line, match[line], axis_stats(d)});
      }
      write_file_atomic(out_dir / "plot_directrix.csv", directrix);
      write_file_atomic(out_dir / "plot_ruling.csv", ruling);
    }

    if (fs::exists(est_dir / "windows.jsonl")) {
      std::ifstream in(est_dir / "windows.jsonl");
      std::string line;
      double loss_sum = 0.0;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        const Json w = Json::parse(line);
        auto& s = report.windows;
        ++s.count;
        const double loss = w.at("loss").get<double>();
        loss_sum += loss;
        s.max_loss = std::max(s.max_loss, loss);
        s.restarts += w.at("restarts").get<long>();
        s.ambiguous += w.at("ambiguous").get<long>();
        s.unassigned += w.at("unassigned").get<long>();
        s.dropped += w.at("dropped").get<long>();
      }
      if (report.windows.count) {
        report.windows.mean_loss = loss_sum / static_cast<double>(report.windows.count);
      }
    }
    if (fs::exists(est_dir / "run.json")) {
      const Json run = read_json_file((est_dir / "run.json").string());
      if (run.contains("elapsed_seconds")) {
        report.estimate_seconds = run.at("elapsed_seconds").get<double>();
      }
    }

    write_file_atomic(out_dir / "report.json", to_json(report).dump(2) + "\n");
    auto row = [&](const char* name, const AxisStats& s) {
      out << name << ": " << format_number(s.mean) << " +- " << format_number(s.std) << " m\n";
    };
    row("X", report.trajectory.x);
    row("Y", report.trajectory.y);
    row("Z", report.trajectory.z);
    for (const auto& l : report.lines) {
      out << "line " << l.line << " (true " << l.truth_line
          << "): " << format_number(l.distance.mean) << " +- "
          << format_number(l.distance.std) << " m\n";
    }
    return kExitOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }
}

int cmd_inspect(const std::string& dataset_dir, std::ostream& out, std::ostream& err) {
  try {
    const Dataset ds = load_dataset(dataset_dir);
    const auto& imu = ds.imu;
    const double imu_span = imu.end_time() - imu.begin_time();
    out << "dataset: " << dataset_dir << "\n";
    out << "imu: " << imu.size() << " samples over [" << format_number(imu.begin_time())
        << ", " << format_number(imu.end_time()) << "] s, rate "
        << (imu_span > 0 ? (imu.size() - 1) / imu_span : 0.0) << " Hz\n";
    if (ds.has_observations()) {
      std::size_t lo = ds.frames.front().points.size(), hi = 0, total = 0;
      for (const auto& f : ds.frames) {
        lo = std::min(lo, f.points.size());
        hi = std::max(hi, f.points.size());
        total += f.points.size();
      }
      out << "frames: " << ds.frames.size() << " over [" << format_number(ds.frames.front().t)
          << ", " << format_number(ds.frames.back().t) << "] s\n";
      out << "observations per frame: min " << lo << ", mean "
          << static_cast<double>(total) / static_cast<double>(ds.frames.size()) << ", max "
          << hi << " (total " << total << ")\n";
    } else {
      out << "frames: none (observations.csv absent)\n";
    }
    out << "rasters: " << ds.rasters.size() << "\n";
    out << "truth: " << (ds.truth ? "present" : "absent") << "\n";
    out << "config: " << ds.config.dump() << "\n";
    return kExitOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }
}

}  // namespace ruledvo
