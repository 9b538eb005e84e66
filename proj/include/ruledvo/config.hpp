#pragma once

// JSON forms of the pipeline configuration and of simulation scenarios.
// Readers accept partial documents on top of a base value and reject
// unknown keys; errors are InvalidArgument with the dotted field name.

#include <string>
#include <vector>

#include <json.hpp>

#include "ruledvo/pipeline.hpp"
#include "ruledvo/sim.hpp"

namespace ruledvo {

using Json = nlohmann::ordered_json;

Json to_json(const PipelineConfig& config);
PipelineConfig pipeline_config_from_json(const Json& j, PipelineConfig base = {});

Json to_json(const ScenarioSpec& spec);
// Parses and validates.
ScenarioSpec scenario_from_json(const Json& j);

Json to_json(const Intrinsics& k);
Intrinsics intrinsics_from_json(const Json& j);

// Applies "a.b.c=value" assignments to a JSON document. The value is read
// as JSON when it parses, as a string otherwise.
void apply_overrides(Json& j, const std::vector<std::string>& assignments);

// Reads a whole JSON file; parse errors become InputError naming the file.
Json read_json_file(const std::string& path);

}  // namespace ruledvo
