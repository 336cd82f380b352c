#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dagcn/model.hpp"

namespace dagcn {

/// Self-describing model snapshot: config, seed, every parameter with its
/// shape, plus the evaluation context it was saved with. Stored as JSON with
/// shortest round-trip doubles, so reloading is bit-exact.
struct Checkpoint {
    ModelConfig config;
    std::uint64_t seed = 0;
    ModelParams params;
    std::string dataset;
    std::size_t fold = 0;
    double learning_rate = 0.0;
    std::vector<std::size_t> test_indices;
    double test_accuracy = 0.0;
};

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
/// Throws IoError / FormatError; parameter shapes are checked against the config.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace dagcn
