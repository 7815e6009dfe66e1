#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "abfr/tensor.hpp"

namespace abfr {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

// Writes <path> (JSON manifest: names, shapes, offsets) and <path>.bin
// (concatenated little-endian float64 values in manifest order). `extra` is
// stored under the manifest's "meta" key.
void save_checkpoint(const std::filesystem::path& path, std::span<const NamedTensor> params,
                     const nlohmann::json& extra = nlohmann::json::object());

// Reads a checkpoint written by save_checkpoint. Tensors come back without
// gradients.
std::vector<NamedTensor> read_checkpoint(const std::filesystem::path& path, nlohmann::json* meta = nullptr);

// Overwrites the values of `params` in place. Names and shapes must match.
void load_checkpoint(const std::filesystem::path& path, std::span<const NamedTensor> params);

}  // namespace abfr
