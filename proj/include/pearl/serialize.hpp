#pragma once

#include <filesystem>
#include <string>

#include "pearl/tensor.hpp"

namespace pearl {

// Checkpoint format: "PEARLPS1" magic, uint32 header length, JSON header
// (version, name -> shape), then raw little-endian doubles in row-major
// order, parameters in header order. Round-trips are bit-exact.
void save_parameters(const std::filesystem::path& path, const ParameterSet& params);

// Loads into an existing set (shape-checked) ...
void load_parameters_into(const std::filesystem::path& path, ParameterSet& params);
// ... or builds a fresh one from the file.
ParameterSet load_parameters(const std::filesystem::path& path);

}  // namespace pearl
