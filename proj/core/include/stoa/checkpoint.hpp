#pragma once

#include <filesystem>
#include <string>

#include "stoa/nn.hpp"

namespace stoa {

// Checkpoint file: magic "STOAW", version u32, config text (u64 length +
// bytes), parameter count u32, then per parameter: name (u32 length + bytes),
// rows u32, cols u32, row-major 32-bit little-endian floats.
void save_checkpoint(const ParamStore& params, const std::string& config_text,
                     const std::filesystem::path& path);

// Loads into an existing store; every stored name must exist with the same
// shape. Returns the embedded config text.
std::string load_checkpoint(ParamStore& params, const std::filesystem::path& path);

// Reads only the embedded config text.
std::string read_checkpoint_config(const std::filesystem::path& path);

}  // namespace stoa
