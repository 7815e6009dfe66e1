#include "abfr/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "abfr/binary_io.hpp"
#include "abfr/errors.hpp"

namespace abfr {

std::vector<double> FunctionRepresentation::token_positions() const {
  std::vector<double> out(n_rows * 3, 0.0);
  if (n_iterations == 0) return out;
  for (std::size_t it = 0; it < n_iterations; ++it)
    for (std::size_t i = 0; i < n_rows * 3; ++i) out[i] += positions[it * n_rows * 3 + i];
  for (auto& v : out) v /= static_cast<double>(n_iterations);
  return out;
}

Voxel draw_patch_center(SpatialDims dims, Rng& rng) {
  Voxel c{};
  for (std::size_t a = 0; a < 3; ++a)
    c[a] = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(dims[a]) - 1));
  return c;
}

std::vector<Voxel> sample_patch_centers(SpatialDims dims, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ValidationError("sample_patch_centers: n must be at least 1");
  if (dims.voxels() == 0) throw ValidationError("sample_patch_centers: empty volume");
  Rng rng(seed);
  std::vector<Voxel> out(n);
  for (auto& c : out) c = draw_patch_center(dims, rng);
  return out;
}

PatchSpec patch_from_center(const Voxel& center, std::size_t size, SpatialDims dims) {
  PatchSpec spec{{}, size};
  for (std::size_t a = 0; a < 3; ++a) {
    if (size == 0 || size > dims[a]) throw ValidationError("patch size " + std::to_string(size) + " does not fit");
    const std::size_t half = size / 2;
    const std::size_t start = center[a] >= half ? center[a] - half : 0;
    spec.start[a] = std::min(start, dims[a] - size);
  }
  return spec;
}

std::array<double, 3> normalized_center(const PatchSpec& spec, SpatialDims dims) {
  std::array<double, 3> pos{};
  for (std::size_t a = 0; a < 3; ++a)
    pos[a] = (static_cast<double>(spec.start[a]) + static_cast<double>(spec.size) / 2.0) / static_cast<double>(dims[a]);
  return pos;
}

namespace {

// Offsets (into one frame) of the voxels in the patch that the mask keeps.
std::vector<std::size_t> masked_offsets(const GrayMatterMask& mask, const PatchSpec& spec) {
  std::vector<std::size_t> out;
  for (std::size_t x = spec.start[0]; x < spec.start[0] + spec.size; ++x)
    for (std::size_t y = spec.start[1]; y < spec.start[1] + spec.size; ++y)
      for (std::size_t z = spec.start[2]; z < spec.start[2] + spec.size; ++z)
        if (mask.at(x, y, z)) out.push_back(mask.index(x, y, z));
  return out;
}

Series mean_over(const FmriVolume& volume, std::span<const std::size_t> offsets) {
  Series out(volume.timepoints());
  const double inv = 1.0 / static_cast<double>(offsets.size());
  for (std::size_t t = 0; t < volume.timepoints(); ++t) {
    const auto frame = volume.frame(t);
    double s = 0.0;
    for (auto o : offsets) s += frame[o];
    out[t] = s * inv;
  }
  return out;
}

void check_patch_inside(const PatchSpec& spec, SpatialDims dims) {
  for (std::size_t a = 0; a < 3; ++a)
    if (spec.size == 0 || spec.start[a] + spec.size > dims[a])
      throw ValidationError("patch lies outside the volume");
}

}  // namespace

Series patch_mean_signal(const FmriVolume& volume, const GrayMatterMask& mask, const PatchSpec& spec) {
  if (!(volume.dims() == mask.dims())) throw ValidationError("volume and mask spatial dims differ");
  check_patch_inside(spec, mask.dims());
  const auto offsets = masked_offsets(mask, spec);
  if (offsets.empty()) throw EmptyPatch("patch does not intersect the gray-matter mask");
  return mean_over(volume, offsets);
}

Series anchor_mean_signal(const FmriVolume& volume, const GrayMatterMask& region) {
  if (!(volume.dims() == region.dims())) throw ValidationError("volume and region spatial dims differ");
  std::vector<std::size_t> offsets;
  const auto bits = region.values();
  for (std::size_t i = 0; i < bits.size(); ++i)
    if (bits[i]) offsets.push_back(i);
  if (offsets.empty()) throw ValidationError("anchor region is empty");
  return mean_over(volume, offsets);
}

GrayMatterMask anchor_region(const PatchSpec& anchor, const GrayMatterMask& mask) {
  check_patch_inside(anchor, mask.dims());
  auto cube = GrayMatterMask::filled(mask.dims(), false);
  auto masked = cube;
  bool any = false;
  for (std::size_t x = anchor.start[0]; x < anchor.start[0] + anchor.size; ++x)
    for (std::size_t y = anchor.start[1]; y < anchor.start[1] + anchor.size; ++y)
      for (std::size_t z = anchor.start[2]; z < anchor.start[2] + anchor.size; ++z) {
        cube.set(x, y, z, true);
        if (mask.at(x, y, z)) {
          masked.set(x, y, z, true);
          any = true;
        }
      }
  return any ? masked : cube;
}

std::vector<Series> anchor_signals(const FmriVolume& volume, const GrayMatterMask& mask, const AnchorSet& anchors) {
  if (anchors.anchors.empty()) throw ValidationError("anchor set is empty");
  std::vector<Series> out;
  out.reserve(anchors.anchors.size());
  for (const auto& a : anchors.anchors) out.push_back(anchor_mean_signal(volume, anchor_region(a, mask)));
  return out;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw ValidationError("pearson: length mismatch " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  if (a.size() < 2) throw ValidationError("pearson: need at least 2 samples");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

std::vector<double> build_fc_matrix(std::span<const PatchSample> patches, std::span<const Series> anchor_signals) {
  if (patches.empty() || anchor_signals.empty()) throw ValidationError("build_fc_matrix: empty input");
  std::vector<double> fc(patches.size() * anchor_signals.size());
  for (std::size_t i = 0; i < patches.size(); ++i)
    for (std::size_t j = 0; j < anchor_signals.size(); ++j)
      fc[i * anchor_signals.size() + j] = pearson(patches[i].mean_signal, anchor_signals[j]);
  return fc;
}

std::vector<PatchSample> sample_patches(const FmriVolume& volume, const GrayMatterMask& mask, std::size_t n_patches,
                                        std::size_t patch_size, Rng& rng, const SamplingOptions& opts) {
  if (n_patches == 0) throw ValidationError("n_patches must be at least 1");
  const auto dims = volume.dims();
  if (!(dims == mask.dims())) throw ValidationError("volume and mask spatial dims differ");
  if (patch_size == 0 || patch_size > std::min({dims.x, dims.y, dims.z}))
    throw ValidationError("patch size " + std::to_string(patch_size) + " does not fit the volume");

  std::vector<PatchSample> out;
  out.reserve(n_patches);
  while (out.size() < n_patches) {
    bool placed = false;
    for (std::size_t attempt = 0; attempt < opts.max_attempts && !placed; ++attempt) {
      const auto spec = patch_from_center(draw_patch_center(dims, rng), patch_size, dims);
      const auto offsets = masked_offsets(mask, spec);
      if (offsets.empty()) continue;
      out.push_back({spec, mean_over(volume, offsets), normalized_center(spec, dims)});
      placed = true;
    }
    if (!placed)
      throw NoValidPlacement(out.size(), n_patches,
                             "patch sampling exhausted " + std::to_string(opts.max_attempts) + " attempts");
  }
  return out;
}

namespace {

FunctionRepresentation sample_representation(const FmriVolume& volume, const GrayMatterMask& mask,
                                             const AnchorSet& anchors, std::size_t n_per_pass,
                                             std::span<const std::size_t> sizes, std::uint64_t seed,
                                             const SamplingOptions& opts) {
  if (sizes.empty()) throw ValidationError("at least one patch size is required");
  const auto signals = anchor_signals(volume, mask, anchors);
  FunctionRepresentation rep;
  rep.n_rows = n_per_pass;
  rep.n_anchors = signals.size();
  rep.n_iterations = sizes.size();
  rep.seed = seed;
  rep.patch_sizes_used.assign(sizes.begin(), sizes.end());
  rep.fc.assign(n_per_pass * rep.n_anchors, 0.0);

  Rng rng(seed);
  for (auto size : sizes) {
    const auto patches = sample_patches(volume, mask, n_per_pass, size, rng, opts);
    auto fc = build_fc_matrix(patches, signals);
    for (std::size_t i = 0; i < fc.size(); ++i) rep.fc[i] += fc[i];
    rep.iteration_fc.push_back(std::move(fc));
    for (const auto& p : patches) {
      rep.patches.push_back(p.spec);
      rep.positions.insert(rep.positions.end(), p.position.begin(), p.position.end());
    }
  }
  for (auto& v : rep.fc) v /= static_cast<double>(sizes.size());
  return rep;
}

}  // namespace

FunctionRepresentation random_sampling_representation(const FmriVolume& volume, const GrayMatterMask& mask,
                                                      const AnchorSet& anchors, std::size_t n_patches,
                                                      std::size_t patch_size, std::uint64_t seed,
                                                      const SamplingOptions& opts) {
  const std::size_t sizes[] = {patch_size};
  return sample_representation(volume, mask, anchors, n_patches, sizes, seed, opts);
}

FunctionRepresentation iterative_sampling_representation(const FmriVolume& volume, const GrayMatterMask& mask,
                                                         const AnchorSet& anchors, std::size_t n_patches_per_iter,
                                                         std::span<const std::size_t> sizes, std::uint64_t seed,
                                                         const SamplingOptions& opts) {
  return sample_representation(volume, mask, anchors, n_patches_per_iter, sizes, seed, opts);
}

void write_representation(const std::filesystem::path& path, const FunctionRepresentation& rep,
                          const nlohmann::json& extra) {
  nlohmann::json header;
  header["format"] = "abfr-features";
  header["version"] = 1;
  header["n_rows"] = rep.n_rows;
  header["n_anchors"] = rep.n_anchors;
  header["n_iterations"] = rep.n_iterations;
  header["patch_sizes"] = rep.patch_sizes_used;
  header["seed"] = rep.seed;
  auto& patches = header["patches"] = nlohmann::json::array();
  for (const auto& p : rep.patches) patches.push_back({{"start", p.start}, {"size", p.size}});
  header["extra"] = extra;
  const std::string text = header.dump();

  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + path.string());
  os.write("ABFRFEAT", 8);
  io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(text.size()));
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (double v : rep.fc) io::write_f64(os, v);
  for (const auto& m : rep.iteration_fc)
    for (double v : m) io::write_f64(os, v);
  for (double v : rep.positions) io::write_f64(os, v);
  if (!os) throw Error("write failed for " + path.string());
}

FunctionRepresentation read_representation(const std::filesystem::path& path, nlohmann::json* extra) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ParseError(ParseErrorKind::io, "cannot open " + path.string());
  char magic[8];
  if (!is.read(magic, 8) || std::string(magic, 8) != "ABFRFEAT")
    throw ParseError(ParseErrorKind::bad_magic, path.string() + ": not a feature file");
  std::uint32_t len = 0;
  if (!io::read_le(is, len)) throw ParseError(ParseErrorKind::truncated, path.string() + ": truncated header");
  std::string text(len, '\0');
  if (!is.read(text.data(), len)) throw ParseError(ParseErrorKind::truncated, path.string() + ": truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(ParseErrorKind::malformed, path.string() + ": " + e.what());
  }

  FunctionRepresentation rep;
  rep.n_rows = header.at("n_rows").get<std::size_t>();
  rep.n_anchors = header.at("n_anchors").get<std::size_t>();
  rep.n_iterations = header.at("n_iterations").get<std::size_t>();
  rep.patch_sizes_used = header.at("patch_sizes").get<std::vector<std::size_t>>();
  rep.seed = header.at("seed").get<std::uint64_t>();
  for (const auto& p : header.at("patches"))
    rep.patches.push_back({p.at("start").get<Voxel>(), p.at("size").get<std::size_t>()});
  if (extra) *extra = header.value("extra", nlohmann::json::object());

  auto read_block = [&](std::vector<double>& dst, std::size_t n) {
    dst.resize(n);
    for (auto& v : dst)
      if (!io::read_f64(is, v)) throw ParseError(ParseErrorKind::truncated, path.string() + ": truncated payload");
  };
  const std::size_t cells = rep.n_rows * rep.n_anchors;
  read_block(rep.fc, cells);
  rep.iteration_fc.resize(rep.n_iterations);
  for (auto& m : rep.iteration_fc) read_block(m, cells);
  read_block(rep.positions, rep.n_rows * rep.n_iterations * 3);
  return rep;
}

}  // namespace abfr
