#pragma once

#include <filesystem>

#include "spine3d/io.hpp"
#include "spine3d/regressor.hpp"

namespace spine3d {

/// Model configuration as key=value pairs (conv_stages as "ch:stride,...").
KeyValues model_config_to_key_values(const ModelConfig& cfg);
ModelConfig model_config_from_key_values(const KeyValues& kv);

/// Checkpoint layout: a text header
///   spine3d-checkpoint 1
///   <model config key=value lines>
///   offsets=<count>
///   parameters=<count>
///   end
/// followed by the parameters as little-endian 64-bit floats in declaration order,
/// then the fixed output offsets in the same encoding.
void write_checkpoint(const std::filesystem::path& path, const RegressorModel& model);
RegressorModel read_checkpoint(const std::filesystem::path& path);

}  // namespace spine3d
