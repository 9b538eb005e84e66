#pragma once

// Subcommands behind the ruledvo executable. Each returns the process exit
// code: 0 success, 2 input error, 3 detection failure, 4 estimation
// infeasible.

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ruledvo/config.hpp"
#include "ruledvo/evaluate.hpp"

namespace ruledvo {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitDetection = 3;
inline constexpr int kExitInfeasible = 4;

struct LineErrorStats {
  int line = 0;        // estimated line index
  int truth_line = 0;  // closest true line
  AxisStats distance;  // over windows, m
};

struct WindowStats {
  std::size_t count = 0;
  double mean_loss = 0.0;
  double max_loss = 0.0;
  long restarts = 0;
  long ambiguous = 0;
  long unassigned = 0;
  long dropped = 0;
};

struct RunReport {
  TrajectoryErrorStats trajectory;
  std::vector<LineErrorStats> lines;
  WindowStats windows;
  std::optional<double> estimate_seconds;
};

Json to_json(const RunReport& report);
// Throws InputError on schema mismatch.
RunReport run_report_from_json(const Json& j);

struct EstimateOptions {
  std::string config_file;             // applied over the dataset's config.json
  std::vector<std::string> overrides;  // key=value, applied last
};

struct EvaluateOptions {
  std::string out_dir;  // defaults to the estimate directory
  bool svg = false;
};

int cmd_simulate(const std::string& spec_path, const std::string& out_dir, std::ostream& out,
                 std::ostream& err);
int cmd_estimate(const std::string& dataset_dir, const EstimateOptions& options,
                 const std::string& out_dir, std::ostream& out, std::ostream& err);
// truth_source is a dataset directory or a truth.json file.
int cmd_evaluate(const std::string& estimate_dir, const std::string& truth_source,
                 const EvaluateOptions& options, std::ostream& out, std::ostream& err);
int cmd_inspect(const std::string& dataset_dir, std::ostream& out, std::ostream& err);

}  // namespace ruledvo
