#include <iostream>

#include <CLI11.hpp>

#include "ruledvo/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Visual-inertial odometry from ruled surfaces"};
  app.require_subcommand(1);

  std::string spec_path, sim_out;
  auto* simulate = app.add_subcommand("simulate", "Synthesize a dataset from a scenario file");
  simulate->add_option("spec", spec_path, "Scenario JSON")->required();
  simulate->add_option("out", sim_out, "Output dataset directory")->required();

  std::string dataset, est_out;
  ruledvo::EstimateOptions est_opts;
  auto* estimate = app.add_subcommand("estimate", "Estimate the camera trajectory of a dataset");
  estimate->add_option("dataset", dataset, "Dataset directory")->required();
  estimate->add_option("out", est_out, "Output directory")->required();
  estimate->add_option("--config", est_opts.config_file,
                       "JSON merged over the dataset's config.json");
  estimate->add_option("--set", est_opts.overrides, "Override a knob, e.g. solver.seed=3");

  std::string est_dir, truth;
  ruledvo::EvaluateOptions eval_opts;
  auto* evaluate = app.add_subcommand("evaluate", "Compare an estimate with ground truth");
  evaluate->add_option("estimate", est_dir, "Directory written by estimate")->required();
  evaluate->add_option("truth", truth, "Dataset directory or truth.json")->required();
  evaluate->add_option("--out", eval_opts.out_dir, "Where to write report and plot data");
  evaluate->add_flag("--svg", eval_opts.svg, "Also write an SVG trajectory plot");

  std::string inspect_dir;
  auto* inspect = app.add_subcommand("inspect", "Summarize a dataset");
  inspect->add_option("dataset", inspect_dir, "Dataset directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : ruledvo::kExitInput;
  }

  if (*simulate) return ruledvo::cmd_simulate(spec_path, sim_out, std::cout, std::cerr);
  if (*estimate) return ruledvo::cmd_estimate(dataset, est_opts, est_out, std::cout, std::cerr);
  if (*evaluate) return ruledvo::cmd_evaluate(est_dir, truth, eval_opts, std::cout, std::cerr);
  return ruledvo::cmd_inspect(inspect_dir, std::cout, std::cerr);
}
