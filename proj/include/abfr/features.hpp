#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "json.hpp"
#include "abfr/anchors.hpp"
#include "abfr/rng.hpp"
#include "abfr/volume.hpp"

namespace abfr {

using Series = std::vector<double>;

struct PatchSample {
  PatchSpec spec;
  Series mean_signal;
  std::array<double, 3> position{};  // patch center / spatial dims, in [0, 1]
};

// Function descriptions (correlations against anchors) and position
// descriptions of the sampled patches of one subject.
//
// fc is the per-iteration FC matrices averaged entrywise, so it has one row per
// patch index of a single iteration. positions and patches concatenate all
// iterations (iteration-major).
struct FunctionRepresentation {
  std::size_t n_rows = 0;     // patches per iteration
  std::size_t n_anchors = 0;
  std::size_t n_iterations = 0;
  std::vector<double> fc;                         // n_rows x n_anchors
  std::vector<std::vector<double>> iteration_fc;  // n_iterations of n_rows x n_anchors
  std::vector<double> positions;                  // (n_rows * n_iterations) x 3
  std::vector<PatchSpec> patches;                 // n_rows * n_iterations
  std::vector<std::size_t> patch_sizes_used;
  std::uint64_t seed = 0;

  double fc_at(std::size_t row, std::size_t anchor) const { return fc[row * n_anchors + anchor]; }
  // One position per token: the same-index patch positions averaged over the
  // iterations (n_rows x 3).
  std::vector<double> token_positions() const;
};

std::vector<Voxel> sample_patch_centers(SpatialDims dims, std::size_t n, std::uint64_t seed);
// Uniform integer center on every axis, drawn x then y then z.
Voxel draw_patch_center(SpatialDims dims, Rng& rng);

// Cube of edge `size` extending symmetrically around `center`
// (start = center - size / 2), shifted inward to stay inside the volume.
PatchSpec patch_from_center(const Voxel& center, std::size_t size, SpatialDims dims);

std::array<double, 3> normalized_center(const PatchSpec& spec, SpatialDims dims);

// Per-timepoint mean over voxels inside both the patch cube and the mask.
// Throws EmptyPatch when the intersection is empty.
Series patch_mean_signal(const FmriVolume& volume, const GrayMatterMask& mask, const PatchSpec& spec);

// Per-timepoint mean over the voxels of an arbitrary region.
Series anchor_mean_signal(const FmriVolume& volume, const GrayMatterMask& region);

// Anchor cube intersected with the gray-matter mask. When the cube misses the
// mask entirely (possible for grid anchors with tau = 0) the whole cube is used.
GrayMatterMask anchor_region(const PatchSpec& anchor, const GrayMatterMask& mask);

std::vector<Series> anchor_signals(const FmriVolume& volume, const GrayMatterMask& mask, const AnchorSet& anchors);

// Pearson r, clamped to [-1, 1]; 0 when either series has zero variance.
double pearson(std::span<const double> a, std::span<const double> b);

// C[i][j] = pearson(patch i, anchor j), row-major.
std::vector<double> build_fc_matrix(std::span<const PatchSample> patches, std::span<const Series> anchor_signals);

struct SamplingOptions {
  std::size_t max_attempts = kDefaultMaxAttempts;  // per patch
};

// One pass of n_patches patches of a single size drawn from rng; draws whose
// cube misses the mask are redrawn.
std::vector<PatchSample> sample_patches(const FmriVolume& volume, const GrayMatterMask& mask, std::size_t n_patches,
                                        std::size_t patch_size, Rng& rng, const SamplingOptions& opts = {});

FunctionRepresentation random_sampling_representation(const FmriVolume& volume, const GrayMatterMask& mask,
                                                      const AnchorSet& anchors, std::size_t n_patches,
                                                      std::size_t patch_size, std::uint64_t seed,
                                                      const SamplingOptions& opts = {});

inline const std::vector<std::size_t> kDefaultIterativeSizes{8, 12, 16};

// One pass per size from a single seed stream; the aggregated FC is the
// arithmetic mean of the per-pass matrices, summed in pass order then divided
// by the pass count.
FunctionRepresentation iterative_sampling_representation(const FmriVolume& volume, const GrayMatterMask& mask,
                                                         const AnchorSet& anchors, std::size_t n_patches_per_iter,
                                                         std::span<const std::size_t> sizes, std::uint64_t seed,
                                                         const SamplingOptions& opts = {});

// File layout: "ABFRFEAT" | u32 header length | JSON header | float64 LE payload
// (fc, then each iteration_fc, then positions). The header carries shapes,
// sizes, seed, patch specs and the caller's `extra` object.
void write_representation(const std::filesystem::path& path, const FunctionRepresentation& rep,
                          const nlohmann::json& extra = nlohmann::json::object());
FunctionRepresentation read_representation(const std::filesystem::path& path, nlohmann::json* extra = nullptr);

}  // namespace abfr
