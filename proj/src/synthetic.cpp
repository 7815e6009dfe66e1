#include "abfr/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "abfr/errors.hpp"
#include "abfr/rng.hpp"

namespace abfr {

nlohmann::json to_json(const SyntheticParams& p) {
  return {{"n_subjects", p.n_subjects},
          {"dims", {p.timepoints, p.dims.x, p.dims.y, p.dims.z}},
          {"n_latent_signals", p.n_latent_signals},
          {"effect_size", p.effect_size},
          {"seed", p.seed},
          {"structure_seed", p.structure_seed},
          {"noise_std", p.noise_std},
          {"subject_jitter", p.subject_jitter},
          {"asd_fraction", p.asd_fraction},
          {"regions_per_axis", p.regions_per_axis}};
}

SyntheticParams synthetic_params_from_json(const nlohmann::json& j) {
  SyntheticParams p;
  p.n_subjects = j.value("n_subjects", p.n_subjects);
  if (j.contains("dims")) {
    const auto d = j.at("dims").get<std::vector<std::size_t>>();
    if (d.size() != 4) throw ValidationError("dims must list T, X, Y, Z");
    p.timepoints = d[0];
    p.dims = {d[1], d[2], d[3]};
  }
  p.n_latent_signals = j.value("n_latent_signals", p.n_latent_signals);
  p.effect_size = j.value("effect_size", p.effect_size);
  p.seed = j.value("seed", p.seed);
  p.structure_seed = j.value("structure_seed", p.structure_seed);
  p.noise_std = j.value("noise_std", p.noise_std);
  p.subject_jitter = j.value("subject_jitter", p.subject_jitter);
  p.asd_fraction = j.value("asd_fraction", p.asd_fraction);
  p.regions_per_axis = j.value("regions_per_axis", p.regions_per_axis);
  return p;
}

GrayMatterMask ellipsoid_mask(SpatialDims dims) {
  auto mask = GrayMatterMask::filled(dims, false);
  const double rx = dims.x / 2.0, ry = dims.y / 2.0, rz = dims.z / 2.0;
  for (std::size_t x = 0; x < dims.x; ++x)
    for (std::size_t y = 0; y < dims.y; ++y)
      for (std::size_t z = 0; z < dims.z; ++z) {
        const double dx = (x + 0.5 - rx) / rx, dy = (y + 0.5 - ry) / ry, dz = (z + 0.5 - rz) / rz;
        mask.set(x, y, z, dx * dx + dy * dy + dz * dz <= 1.0);
      }
  return mask;
}

std::size_t region_of(const Voxel& v, SpatialDims dims, std::size_t regions_per_axis) {
  std::size_t r = 0;
  for (std::size_t a = 0; a < 3; ++a) r = r * regions_per_axis + v[a] * regions_per_axis / dims[a];
  return r;
}

SyntheticCohort generate_synthetic_cohort(const SyntheticParams& params) {
  const auto& p = params;
  if (p.n_subjects < 2) throw ValidationError("synthetic cohort needs at least 2 subjects");
  if (p.timepoints < 16) throw ValidationError("synthetic cohort needs at least 16 timepoints");
  if (p.dims.x == 0 || p.dims.y == 0 || p.dims.z == 0) throw ValidationError("spatial dimensions must be positive");
  if (p.n_latent_signals == 0) throw ValidationError("need at least one latent signal");
  if (!(p.effect_size >= 0.0)) throw ValidationError("effect_size must be non-negative");
  if (!(p.asd_fraction >= 0.0 && p.asd_fraction <= 1.0)) throw ValidationError("asd_fraction must lie in [0, 1]");
  if (p.regions_per_axis == 0) throw ValidationError("regions_per_axis must be positive");

  SyntheticCohort cohort;
  cohort.params = p;
  cohort.mask = ellipsoid_mask(p.dims);

  const std::size_t n_regions = p.regions_per_axis * p.regions_per_axis * p.regions_per_axis;
  const std::size_t L = p.n_latent_signals;
  std::vector<double> base(n_regions * L), delta(n_regions * L);
  {
    Rng structure(p.structure_seed);
    for (auto& w : base) w = structure.normal();
    for (auto& w : delta) w = structure.normal();
  }

  std::vector<std::size_t> voxel_region(p.dims.voxels());
  for (std::size_t x = 0; x < p.dims.x; ++x)
    for (std::size_t y = 0; y < p.dims.y; ++y)
      for (std::size_t z = 0; z < p.dims.z; ++z)
        voxel_region[cohort.mask.index(x, y, z)] = region_of({x, y, z}, p.dims, p.regions_per_axis);

  const std::size_t T = p.timepoints;
  const std::size_t window = std::max<std::size_t>(1, T / 8);
  const std::size_t V = p.dims.voxels();
  Rng rng(p.seed);

  for (std::size_t s = 0; s < p.n_subjects; ++s) {
    const auto frac = p.asd_fraction;
    const int label = static_cast<std::size_t>(std::floor((s + 1) * frac)) > static_cast<std::size_t>(std::floor(s * frac))
                          ? kAsd
                          : kControl;
    const double class_sign = label == kAsd ? 0.5 : -0.5;

    std::vector<double> latent(L * T);
    for (std::size_t l = 0; l < L; ++l) {
      std::vector<double> raw(T + window - 1);
      for (auto& v : raw) v = rng.normal();
      for (std::size_t t = 0; t < T; ++t) {
        double acc = 0.0;
        for (std::size_t k = 0; k < window; ++k) acc += raw[t + k];
        latent[l * T + t] = acc / std::sqrt(static_cast<double>(window));
      }
    }

    std::vector<double> weights(n_regions * L);
    for (std::size_t i = 0; i < weights.size(); ++i)
      weights[i] = base[i] + p.subject_jitter * rng.normal() + p.effect_size * class_sign * delta[i];

    std::vector<double> regional(n_regions * T, 0.0);
    for (std::size_t r = 0; r < n_regions; ++r)
      for (std::size_t l = 0; l < L; ++l)
        for (std::size_t t = 0; t < T; ++t) regional[r * T + t] += weights[r * L + l] * latent[l * T + t];

    std::vector<float> values(T * V);
    const auto mask_bits = cohort.mask.values();
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t v = 0; v < V; ++v) {
        const double signal = mask_bits[v] ? regional[voxel_region[v] * T + t] : 0.0;
        values[t * V + v] = static_cast<float>(100.0 + signal + p.noise_std * rng.normal());
      }

    char id[32];
    std::snprintf(id, sizeof id, "sub-%04zu", s);
    cohort.subjects.push_back({id, FmriVolume(T, p.dims, std::move(values)), label});
  }
  return cohort;
}

std::filesystem::path write_cohort(const std::filesystem::path& dir, const SyntheticCohort& cohort,
                                   const nlohmann::json& extra) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["format"] = "abfr-cohort";
  manifest["generator"] = to_json(cohort.params);
  auto& subjects = manifest["subjects"] = nlohmann::json::array();
  for (const auto& s : cohort.subjects) {
    const auto file = s.id + ".abfr";
    write_volume(dir / file, s.volume, cohort.mask);
    subjects.push_back({{"id", s.id}, {"file", file}, {"label", s.label}});
  }
  for (const auto& [key, value] : extra.items()) manifest[key] = value;
  const auto path = dir / "cohort.json";
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  os << manifest.dump(2) << '\n';
  return path;
}

CohortManifest read_cohort_manifest(const std::filesystem::path& manifest_path) {
  std::ifstream is(manifest_path);
  if (!is) throw ParseError(ParseErrorKind::io, "cannot open cohort manifest " + manifest_path.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(ParseErrorKind::malformed, manifest_path.string() + ": " + e.what());
  }
  if (j.value("format", "") != "abfr-cohort")
    throw ParseError(ParseErrorKind::bad_magic, manifest_path.string() + " is not a cohort manifest");
  CohortManifest m;
  m.generator = j.value("generator", nlohmann::json::object());
  for (const auto& s : j.at("subjects")) {
    const int label = s.at("label").get<int>();
    if (label != kControl && label != kAsd)
      throw ParseError(ParseErrorKind::malformed, "subject label must be 0 or 1");
    m.subjects.push_back({s.at("id").get<std::string>(), manifest_path.parent_path() / s.at("file").get<std::string>(),
                          label});
  }
  return m;
}

}  // namespace abfr
