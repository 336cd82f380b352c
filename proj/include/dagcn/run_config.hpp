#pragma once

#include <cstddef>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "dagcn/graph_io.hpp"
#include "dagcn/model.hpp"
#include "dagcn/training.hpp"

namespace dagcn {

/// Everything a `train` run needs. Every field has a default, so an empty
/// config file is valid.
struct RunConfig {
    std::filesystem::path dataset_dir = "data";
    std::string dataset_name = "MUTAG";
    LoadOptions load;
    std::filesystem::path output_dir = "runs";
    std::size_t jobs = 1;
    TrainConfig train;
};

nlohmann::json model_config_to_json(const ModelConfig& m);
ModelConfig model_config_from_json(const nlohmann::json& j, const std::string& where = "model");

nlohmann::json train_config_to_json(const TrainConfig& t);

nlohmann::json run_config_to_json(const RunConfig& c);
/// Throws ConfigError naming the offending key on unknown keys or bad types.
RunConfig run_config_from_json(const nlohmann::json& j);

/// Reads a JSON config file; an empty (or whitespace-only) file gives defaults.
RunConfig load_run_config(const std::filesystem::path& path);
void save_run_config(const RunConfig& config, const std::filesystem::path& path);

std::string_view to_string(FeatureScheme s) noexcept;
FeatureScheme parse_feature_scheme(std::string_view s);

}  // namespace dagcn
