#include "abfr/anchors.hpp"

#include <algorithm>

#include "abfr/errors.hpp"

namespace abfr {

std::string to_string(AnchorMethod m) { return m == AnchorMethod::grid ? "grid" : "random"; }

AnchorMethod anchor_method_from_string(const std::string& s) {
  if (s == "grid") return AnchorMethod::grid;
  if (s == "random") return AnchorMethod::random;
  throw ValidationError("unknown anchor method '" + s + "' (expected grid or random)");
}

std::size_t default_tau(std::size_t patch_size) {
  const std::size_t volume = patch_size * patch_size * patch_size;
  return (volume + 1) / 2;
}

std::size_t patch_overlap(const PatchSpec& patch, const GrayMatterMask& mask) {
  const auto& d = mask.dims();
  for (std::size_t a = 0; a < 3; ++a)
    if (patch.size == 0 || patch.start[a] + patch.size > d[a])
      throw ValidationError("patch at (" + std::to_string(patch.start[0]) + "," + std::to_string(patch.start[1]) + "," +
                            std::to_string(patch.start[2]) + ") size " + std::to_string(patch.size) +
                            " lies outside the volume");
  std::size_t n = 0;
  for (std::size_t x = patch.start[0]; x < patch.start[0] + patch.size; ++x)
    for (std::size_t y = patch.start[1]; y < patch.start[1] + patch.size; ++y)
      for (std::size_t z = patch.start[2]; z < patch.start[2] + patch.size; ++z) n += mask.at(x, y, z);
  return n;
}

namespace {

void check_patch_fits(const GrayMatterMask& mask, std::size_t patch_size) {
  if (patch_size == 0) throw ValidationError("patch size must be positive");
  const auto& d = mask.dims();
  if (patch_size > std::min({d.x, d.y, d.z}))
    throw ValidationError("patch size " + std::to_string(patch_size) + " exceeds a spatial dimension");
}

}  // namespace

AnchorSet grid_anchor_selection(const GrayMatterMask& mask, std::size_t patch_size, Voxel stride, Voxel offset,
                                std::size_t tau) {
  check_patch_fits(mask, patch_size);
  for (std::size_t a = 0; a < 3; ++a) {
    if (stride[a] == 0) throw ValidationError("grid stride must be at least 1");
    if (offset[a] >= stride[a]) throw ValidationError("grid offset must be smaller than the stride");
  }
  const auto box = mask.bounding_box();
  std::array<std::vector<std::size_t>, 3> starts;
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t s = box.lo[a] + offset[a]; s + patch_size <= box.hi[a]; s += stride[a]) starts[a].push_back(s);

  AnchorSet set;
  set.method = AnchorMethod::grid;
  set.tau = tau;
  for (auto x : starts[0])
    for (auto y : starts[1])
      for (auto z : starts[2]) {
        PatchSpec p{{x, y, z}, patch_size};
        if (tau > 0 && patch_overlap(p, mask) < tau) continue;
        set.anchors.push_back(p);
      }
  if (set.anchors.empty()) throw NoValidPlacement(0, 1, "grid anchor selection: no grid cell fits the mask");
  return set;
}

std::array<std::pair<std::int64_t, std::int64_t>, 3> anchor_start_ranges(const GrayMatterMask& mask,
                                                                       std::size_t patch_size) {
  check_patch_fits(mask, patch_size);
  const auto box = mask.bounding_box();
  const auto p = static_cast<std::int64_t>(patch_size);
  std::array<std::pair<std::int64_t, std::int64_t>, 3> ranges;
  for (std::size_t a = 0; a < 3; ++a) {
    const auto lo = static_cast<std::int64_t>(box.lo[a]);
    const auto hi = static_cast<std::int64_t>(box.hi[a]);
    const auto dim = static_cast<std::int64_t>(mask.dims()[a]);
    if (hi - lo >= p)
      ranges[a] = {lo, hi - p};
    else
      ranges[a] = {std::max<std::int64_t>(0, hi - p), std::min(lo, dim - p)};
  }
  return ranges;
}

AnchorSet random_anchor_selection(const GrayMatterMask& mask, std::size_t patch_size, std::size_t n_anchors,
                                  std::size_t tau, std::uint64_t seed, std::size_t max_attempts) {
  if (n_anchors == 0) throw ValidationError("n_anchors must be at least 1");
  if (tau > patch_size * patch_size * patch_size)
    throw ValidationError("tau " + std::to_string(tau) + " exceeds the patch volume");
  if (mask.count() == 0) throw NoValidPlacement(0, n_anchors, "random anchor selection: mask is empty");
  const auto ranges = anchor_start_ranges(mask, patch_size);

  AnchorSet set;
  set.method = AnchorMethod::random;
  set.tau = tau;
  set.seed = seed;
  Rng rng(seed);
  while (set.anchors.size() < n_anchors) {
    bool placed = false;
    for (std::size_t attempt = 0; attempt < max_attempts && !placed; ++attempt) {
      PatchSpec p{{}, patch_size};
      for (std::size_t a = 0; a < 3; ++a)
        p.start[a] = static_cast<std::size_t>(rng.uniform_int(ranges[a].first, ranges[a].second));
      if (patch_overlap(p, mask) >= tau) {
        set.anchors.push_back(p);
        placed = true;
      }
    }
    if (!placed)
      throw NoValidPlacement(set.anchors.size(), n_anchors,
                             "random anchor selection exhausted " + std::to_string(max_attempts) + " attempts");
  }
  return set;
}

nlohmann::json to_json(const AnchorSet& set) {
  nlohmann::json anchors = nlohmann::json::array();
  for (const auto& a : set.anchors) anchors.push_back({{"start", a.start}, {"size", a.size}});
  return {{"method", to_string(set.method)}, {"seed", set.seed}, {"tau", set.tau}, {"anchors", anchors}};
}

AnchorSet anchor_set_from_json(const nlohmann::json& j) {
  AnchorSet set;
  set.method = anchor_method_from_string(j.at("method").get<std::string>());
  set.seed = j.value("seed", std::uint64_t{0});
  set.tau = j.value("tau", std::size_t{0});
  for (const auto& a : j.at("anchors"))
    set.anchors.push_back({a.at("start").get<Voxel>(), a.at("size").get<std::size_t>()});
  return set;
}

}  // namespace abfr
