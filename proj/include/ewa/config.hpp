#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "ewa/experiments.hpp"

namespace ewa {

/// Reads an experiment config from a JSON document. Missing keys keep their
/// defaults; unknown keys are rejected so that typos do not pass silently.
ExperimentConfig parse_experiment_config(const nlohmann::json& doc);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Fully resolved config; parsing it back gives the same config.
nlohmann::json to_json(const ExperimentConfig& cfg);

}  // namespace ewa
