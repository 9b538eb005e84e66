#include "ruledvo/dataset.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <system_error>

#include "ruledvo/errors.hpp"

namespace ruledvo {
namespace fs = std::filesystem;
namespace {

[[noreturn]] void input_error(const fs::path& path, const std::string& what) {
  throw Error(ErrorCode::kInputError, path.string() + ": " + what);
}

Json vec_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

Vec3 vec_from(const Json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 3) {
    throw Error(ErrorCode::kInputError, "truth.json: " + field + ": expected [x, y, z]");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string strip(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && s[i] == ' ') ++i;
  return s.substr(i);
}

double parse_double(const std::string& text, const fs::path& path, std::size_t line) {
  const std::string s = strip(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    input_error(path, "line " + std::to_string(line) + ": bad number '" + s + "'");
  }
  return v;
}

Json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) input_error(path, "cannot open");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    input_error(path, e.what());
  }
}

}  // namespace

std::string format_number(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

void write_file_atomic(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) input_error(tmp, "cannot write");
    out << content;
    out.flush();
    if (!out) input_error(tmp, "write failed");
  }
  fs::rename(tmp, path);
}

std::vector<std::vector<double>> read_numeric_csv(const fs::path& path,
                                                  const std::vector<std::string>& header) {
  std::ifstream in(path);
  if (!in) input_error(path, "cannot open");
  std::string line;
  if (!std::getline(in, line)) input_error(path, "empty file");
  const auto names = split(strip(line));
  std::vector<std::string> stripped;
  for (const auto& n : names) stripped.push_back(strip(n));
  if (stripped != header) {
    std::string expected;
    for (const auto& h : header) expected += (expected.empty() ? "" : ",") + h;
    input_error(path, "line 1: expected header '" + expected + "'");
  }
  std::vector<std::vector<double>> rows;
  std::size_t number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (strip(line).empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) {
      input_error(path, "line " + std::to_string(number) + ": expected " +
                            std::to_string(header.size()) + " columns");
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) row.push_back(parse_double(c, path, number));
    rows.push_back(std::move(row));
  }
  return rows;
}

Json truth_to_json(const GroundTruth& truth) {
  Json frames = Json::array();
  for (const auto& p : truth.poses) {
    const Quat& q = p.world_from_cam;
    frames.push_back({{"t", p.t},
                      {"position", vec_json(p.position)},
                      {"orientation", Json::array({q.w(), q.x(), q.y(), q.z()})}});
  }
  Json lines = Json::array();
  for (const auto& l : truth.world_lines) {
    lines.push_back({{"x0", vec_json(l.x0)},
                     {"v0", vec_json(l.v0)},
                     {"p1", vec_json(l.x0 - l.v0)},
                     {"p2", vec_json(l.x0 + l.v0)}});
  }
  return {{"frame", "world frame = camera frame at t = 0; orientation is world_from_camera"},
          {"gravity", vec_json(truth.gravity)},
          {"accel_bias", vec_json(truth.accel_bias)},
          {"frames", frames},
          {"lines", lines}};
}

GroundTruth truth_from_json(const Json& j) {
  GroundTruth t;
  try {
    if (j.contains("gravity")) t.gravity = vec_from(j.at("gravity"), "gravity");
    if (j.contains("accel_bias")) t.accel_bias = vec_from(j.at("accel_bias"), "accel_bias");
    for (const auto& f : j.at("frames")) {
      CameraPose p;
      p.t = f.at("t").get<double>();
      p.position = vec_from(f.at("position"), "frames.position");
      const auto& q = f.at("orientation");
      if (!q.is_array() || q.size() != 4) {
        throw Error(ErrorCode::kInputError, "truth.json: frames.orientation: expected [w, x, y, z]");
      }
      p.world_from_cam = Quat(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(),
                              q[3].get<double>());
      t.poses.push_back(p);
    }
    for (const auto& l : j.at("lines")) {
      Vec3 x0, v0;
      if (l.contains("x0")) {
        x0 = vec_from(l.at("x0"), "lines.x0");
        v0 = vec_from(l.at("v0"), "lines.v0");
      } else {
        const Vec3 p1 = vec_from(l.at("p1"), "lines.p1");
        const Vec3 p2 = vec_from(l.at("p2"), "lines.p2");
        x0 = p1;
        v0 = p2 - p1;
      }
      t.world_lines.push_back(canonicalize_line(x0, v0));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInputError, std::string("truth.json: ") + e.what());
  }
  return t;
}

void write_dataset(const fs::path& dir, const ScenarioSpec& spec, const SyntheticData& data,
                   const PipelineConfig& config) {
  fs::create_directories(dir);
  write_file_atomic(dir / "intrinsics.json", to_json(spec.intrinsics).dump(2) + "\n");
  write_file_atomic(dir / "config.json", to_json(config).dump(2) + "\n");
  Json truth = truth_to_json(data.truth);
  truth["scenario"] = to_json(spec);
  write_file_atomic(dir / "truth.json", truth.dump(2) + "\n");

  std::string obs = "t,x,y\n";
  for (const auto& f : data.frames) {
    for (const auto& o : f.points) {
      obs += format_number(f.t) + "," + format_number(o.p.x()) + "," +
             format_number(o.p.y()) + "\n";
    }
  }
  write_file_atomic(dir / "observations.csv", obs);

  if (spec.raster.enabled) {
    const Scene scene(spec);
    fs::create_directories(dir / "frames");
    std::string index = "t,filename\n";
    for (std::size_t i = 0; i < data.frames.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "frames/%06zu.pgm", i);
      const TimedFrame frame = render_noisy_frame(scene, i);
      fs::path tmp = dir / name;
      tmp += ".tmp";
      write_pgm(tmp, frame.image);
      fs::rename(tmp, dir / name);
      index += format_number(frame.t) + "," + name + "\n";
    }
    write_file_atomic(dir / "frames.csv", index);
  }

  std::string imu = "t,ax,ay,az,gx,gy,gz\n";
  for (const auto& s : data.imu.samples()) {
    imu += format_number(s.t);
    for (int i = 0; i < 3; ++i) imu += "," + format_number(s.accel[i]);
    for (int i = 0; i < 3; ++i) imu += "," + format_number(s.gyro[i]);
    imu += "\n";
  }
  write_file_atomic(dir / "imu.csv", imu);
}

GrayImage Dataset::load_raster(std::size_t index) const {
  return read_pgm(dir / rasters.at(index).filename);
}

Dataset load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) input_error(dir, "not a directory");
  Dataset d;
  d.dir = dir;
  if (!fs::exists(dir / "imu.csv")) input_error(dir / "imu.csv", "missing");
  const bool has_obs = fs::exists(dir / "observations.csv");
  const bool has_frames = fs::exists(dir / "frames.csv");
  if (!has_obs && !has_frames) {
    input_error(dir, "needs observations.csv or frames.csv");
  }

  std::vector<ImuSample> samples;
  for (const auto& r : read_numeric_csv(dir / "imu.csv", {"t", "ax", "ay", "az", "gx", "gy", "gz"})) {
    samples.push_back({r[0], Vec3(r[1], r[2], r[3]), Vec3(r[4], r[5], r[6])});
  }
  try {
    d.imu = ImuTrack(std::move(samples));
  } catch (const Error& e) {
    input_error(dir / "imu.csv", e.what());
  }

  if (has_obs) {
    const auto rows = read_numeric_csv(dir / "observations.csv", {"t", "x", "y"});
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const double t = rows[i][0];
      if (d.frames.empty() || d.frames.back().t != t) {
        if (!d.frames.empty() && !(t > d.frames.back().t)) {
          input_error(dir / "observations.csv",
                      "line " + std::to_string(i + 2) + ": timestamps must not decrease");
        }
        d.frames.push_back({t, {}});
      }
      d.frames.back().points.push_back({t, Vec2(rows[i][1], rows[i][2])});
    }
  }

  if (has_frames) {
    std::ifstream in(dir / "frames.csv");
    std::string line;
    std::getline(in, line);
    if (strip(line) != "t,filename") {
      input_error(dir / "frames.csv", "line 1: expected header 't,filename'");
    }
    std::size_t number = 1;
    while (std::getline(in, line)) {
      ++number;
      if (strip(line).empty()) continue;
      const auto cells = split(line);
      if (cells.size() != 2) {
        input_error(dir / "frames.csv", "line " + std::to_string(number) + ": expected 2 columns");
      }
      RasterEntry e{parse_double(cells[0], dir / "frames.csv", number), strip(cells[1])};
      if (!d.rasters.empty() && !(e.t > d.rasters.back().t)) {
        input_error(dir / "frames.csv",
                    "line " + std::to_string(number) + ": timestamps must increase");
      }
      if (!fs::exists(dir / e.filename)) input_error(dir / e.filename, "missing");
      d.rasters.push_back(std::move(e));
    }
  }

  if (fs::exists(dir / "intrinsics.json")) {
    try {
      d.intrinsics = intrinsics_from_json(read_json(dir / "intrinsics.json"));
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kInputError) throw;
      input_error(dir / "intrinsics.json", e.what());
    }
  } else if (has_frames) {
    input_error(dir / "intrinsics.json", "missing; needed for raster frames");
  }
  if (fs::exists(dir / "config.json")) d.config = read_json(dir / "config.json");
  if (fs::exists(dir / "truth.json")) d.truth = read_json(dir / "truth.json");
  return d;
}

}  // namespace ruledvo
