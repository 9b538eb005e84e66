#pragma once

// On-disk dataset layout shared by simulated and recorded sequences:
//   imu.csv            t,ax,ay,az,gx,gy,gz
//   observations.csv   t,x,y (normalized image plane)
//   frames.csv         t,filename, with frames/*.pgm (optional)
//   intrinsics.json, config.json, truth.json (optional)

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ruledvo/config.hpp"
#include "ruledvo/sim.hpp"

namespace ruledvo {

struct RasterEntry {
  double t = 0.0;
  std::string filename;  // relative to the dataset directory
};

struct Dataset {
  std::filesystem::path dir;
  ImuTrack imu;
  std::vector<Frame> frames;  // empty when only rasters are present
  std::vector<RasterEntry> rasters;
  Intrinsics intrinsics;
  Json config = Json::object();
  std::optional<Json> truth;

  bool has_observations() const { return !frames.empty(); }
  GrayImage load_raster(std::size_t index) const;
};

// Writes `content` to path through a temporary file in the same directory
// and a rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

// Shortest text that reads back to the same double.
std::string format_number(double v);

// Rows of numbers from a CSV file with the given header. Throws InputError
// naming the file and line on any malformed row.
std::vector<std::vector<double>> read_numeric_csv(const std::filesystem::path& path,
                                                  const std::vector<std::string>& header);

Json truth_to_json(const GroundTruth& truth);
GroundTruth truth_from_json(const Json& j);

// Writes a simulated sequence. imu.csv is written last so that a dataset
// interrupted part way is rejected on load.
void write_dataset(const std::filesystem::path& dir, const ScenarioSpec& spec,
                   const SyntheticData& data, const PipelineConfig& config = {});

// Throws InputError for missing or malformed files.
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace ruledvo
