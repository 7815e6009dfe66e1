#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "abfr/volume.hpp"

namespace abfr {

struct SyntheticParams {
  std::size_t n_subjects = 40;
  std::size_t timepoints = 32;
  SpatialDims dims{16, 16, 16};
  std::size_t n_latent_signals = 4;
  double effect_size = 2.0;
  std::uint64_t seed = 1;
  // Seeds the class structure (regional mixing weights). Cohorts that share it
  // come from matched generators and differ only in their subjects.
  std::uint64_t structure_seed = 2024;
  double noise_std = 1.0;
  // Spread of the per-subject perturbation of the mixing weights.
  double subject_jitter = 0.5;
  // Fraction of ASD subjects; labels are interleaved so that any prefix is as
  // balanced as possible. 0.5 gives strictly alternating labels.
  double asd_fraction = 0.5;
  std::size_t regions_per_axis = 2;
};

nlohmann::json to_json(const SyntheticParams& p);
SyntheticParams synthetic_params_from_json(const nlohmann::json& j);

inline constexpr int kControl = 0;
inline constexpr int kAsd = 1;

struct Subject {
  std::string id;
  FmriVolume volume;
  int label = kControl;
};

// All subjects share one mask.
struct SyntheticCohort {
  SyntheticParams params;
  GrayMatterMask mask;
  std::vector<Subject> subjects;
};

// Ellipsoid inscribed in the spatial box, tested at voxel centers.
GrayMatterMask ellipsoid_mask(SpatialDims dims);

// Region of a voxel when the box is cut into regions_per_axis^3 equal blocks.
std::size_t region_of(const Voxel& v, SpatialDims dims, std::size_t regions_per_axis);

// Each masked voxel carries sum_l W[region][l] * s_l(t) + noise, where the s_l
// are per-subject smoothed Gaussian latent signals (moving average over T/8
// samples, rescaled to unit variance) and
//   W = base + subject_jitter * N(0,1) + effect_size * (label ? +0.5 : -0.5) * delta.
// base and delta come from structure_seed; everything else from seed.
SyntheticCohort generate_synthetic_cohort(const SyntheticParams& params);

// Writes one volume file per subject plus cohort.json; returns the manifest path.
// Keys of `extra` are copied into cohort.json.
std::filesystem::path write_cohort(const std::filesystem::path& dir, const SyntheticCohort& cohort,
                                   const nlohmann::json& extra = nlohmann::json::object());

struct CohortEntry {
  std::string id;
  std::filesystem::path file;
  int label = kControl;
};

struct CohortManifest {
  std::vector<CohortEntry> subjects;
  nlohmann::json generator;
};

CohortManifest read_cohort_manifest(const std::filesystem::path& manifest_path);

}  // namespace abfr
