#pragma once

#include <string>

#include <json.hpp>

#include "cipolab/core.hpp"

namespace cipolab {

// Serialization of a Context carries only (prompt, candidate) by construction.
void to_json(nlohmann::json& j, const Context& c);

nlohmann::json config_to_json(const ExperimentConfig& config);

// Parses a JSON config object. Every key is optional and falls back to the
// default; unknown keys are a hard error (throws std::runtime_error naming
// the key).
ExperimentConfig config_from_json(const nlohmann::json& j);

ExperimentConfig load_config_file(const std::string& path);

}  // namespace cipolab
