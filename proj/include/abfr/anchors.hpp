#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "abfr/rng.hpp"
#include "abfr/volume.hpp"

namespace abfr {

// Cubic patch: voxels start[a] .. start[a] + size - 1 on every axis.
struct PatchSpec {
  Voxel start{};
  std::size_t size = 0;

  bool operator==(const PatchSpec&) const = default;
};

enum class AnchorMethod { grid, random };

std::string to_string(AnchorMethod m);
AnchorMethod anchor_method_from_string(const std::string& s);

struct AnchorSet {
  std::vector<PatchSpec> anchors;
  std::size_t tau = 0;
  AnchorMethod method = AnchorMethod::grid;
  std::uint64_t seed = 0;  // random method only

  bool operator==(const AnchorSet&) const = default;
};

inline constexpr std::size_t kDefaultMaxAttempts = 1000;

// ceil(p^3 / 2): half the patch must be gray matter.
std::size_t default_tau(std::size_t patch_size);

// Number of mask-positive voxels inside the patch.
std::size_t patch_overlap(const PatchSpec& patch, const GrayMatterMask& mask);

// Grid anchors at bbox.lo + offset + k * stride (per axis) that fit inside the
// mask's bounding box, in lexicographic (x, y, z) order. With tau > 0 anchors
// whose overlap falls below tau are dropped; tau = 0 keeps every grid cell.
AnchorSet grid_anchor_selection(const GrayMatterMask& mask, std::size_t patch_size, Voxel stride, Voxel offset,
                                std::size_t tau = 0);

// Per-axis inclusive range of start coordinates the random method draws from:
// [bbox.lo, bbox.hi - p], or the starts that cover the whole box on an axis
// where the box is narrower than the patch.
std::array<std::pair<std::int64_t, std::int64_t>, 3> anchor_start_ranges(const GrayMatterMask& mask,
                                                                       std::size_t patch_size);

// Draws start coordinates uniformly (x, then y, then z per attempt) and keeps
// a draw when its overlap reaches tau; otherwise draws again, at most
// max_attempts times per anchor.
AnchorSet random_anchor_selection(const GrayMatterMask& mask, std::size_t patch_size, std::size_t n_anchors,
                                  std::size_t tau, std::uint64_t seed,
                                  std::size_t max_attempts = kDefaultMaxAttempts);

nlohmann::json to_json(const AnchorSet& set);
AnchorSet anchor_set_from_json(const nlohmann::json& j);

}  // namespace abfr
