#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "abfr/anchors.hpp"
#include "abfr/features.hpp"
#include "abfr/volume.hpp"

namespace abfr {

enum class Patching { random, iterative };

std::string to_string(Patching p);
Patching patching_from_string(const std::string& s);

struct LabeledSample {
  std::string id;
  FunctionRepresentation rep;
  int label = 0;
};

struct ExtractOptions {
  AnchorMethod anchors = AnchorMethod::random;
  Patching patching = Patching::random;
  std::size_t anchor_size = 8;
  std::size_t n_anchors = 16;              // random anchors only
  std::optional<std::size_t> tau;          // default: ceil(p^3/2) for random, 0 for grid
  std::optional<Voxel> stride;             // grid only; default anchor_size on every axis
  Voxel offset{0, 0, 0};                   // grid only
  std::size_t patch_size = 8;              // random patching
  std::vector<std::size_t> sizes = kDefaultIterativeSizes;  // iterative patching
  std::size_t n_patches = 64;              // per iteration
  std::uint64_t seed = 0;
  std::size_t max_attempts = kDefaultMaxAttempts;

  std::size_t resolved_tau() const;
  void validate() const;
};

nlohmann::json to_json(const ExtractOptions& o);
ExtractOptions extract_options_from_json(const nlohmann::json& j);

// Anchors are fixed per dataset: drawn once from `mask` with options.seed.
AnchorSet select_anchors(const GrayMatterMask& mask, const ExtractOptions& options);

// Patches of subject i are drawn with seed options.seed ^ i.
FunctionRepresentation extract_subject(const FmriVolume& volume, const GrayMatterMask& mask, const AnchorSet& anchors,
                                       const ExtractOptions& options, std::size_t subject_index);

// A feature set directory holds one <id>.feat file per subject and an index,
// features.json, listing id, file and label in subject order.
inline constexpr const char* kFeatureIndexName = "features.json";

std::filesystem::path feature_file_name(const std::string& id);

// Writes the index; `meta` is stored under its "meta" key.
std::filesystem::path write_feature_index(const std::filesystem::path& dir, std::span<const LabeledSample> samples,
                                          const nlohmann::json& meta);

// Accepts the directory or the index file itself.
std::vector<LabeledSample> load_feature_set(const std::filesystem::path& where, nlohmann::json* meta = nullptr);

}  // namespace abfr
