#pragma once

#include <filesystem>

#include "ino/operators.hpp"

namespace ino {

/// Checkpoint directory: a `manifest` text file describing the architecture
/// and parameter list, plus one float64 array file per named parameter.
void save_checkpoint(const ModelParams& params, const std::filesystem::path& dir);
ModelParams load_checkpoint(const std::filesystem::path& dir);

}  // namespace ino
