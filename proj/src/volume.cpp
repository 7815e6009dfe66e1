#include "abfr/volume.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "abfr/binary_io.hpp"
#include "abfr/errors.hpp"

namespace abfr {

namespace {

void check_dims(const SpatialDims& dims) {
  if (dims.x == 0 || dims.y == 0 || dims.z == 0) throw ValidationError("spatial dimensions must be positive");
}

}  // namespace

GrayMatterMask::GrayMatterMask(SpatialDims dims, std::vector<std::uint8_t> values)
    : dims_(dims), values_(std::move(values)) {
  check_dims(dims_);
  if (values_.size() != dims_.voxels())
    throw ValidationError("mask has " + std::to_string(values_.size()) + " voxels, dims need " +
                          std::to_string(dims_.voxels()));
  for (auto v : values_)
    if (v > 1) throw ValidationError("mask values must be 0 or 1");
}

GrayMatterMask GrayMatterMask::filled(SpatialDims dims, bool on) {
  return GrayMatterMask(dims, std::vector<std::uint8_t>(dims.voxels(), on ? 1 : 0));
}

std::size_t GrayMatterMask::count() const {
  return static_cast<std::size_t>(std::count(values_.begin(), values_.end(), std::uint8_t{1}));
}

BoundingBox GrayMatterMask::bounding_box() const {
  BoundingBox box{{dims_.x, dims_.y, dims_.z}, {0, 0, 0}};
  bool any = false;
  for (std::size_t x = 0; x < dims_.x; ++x)
    for (std::size_t y = 0; y < dims_.y; ++y)
      for (std::size_t z = 0; z < dims_.z; ++z) {
        if (!at(x, y, z)) continue;
        any = true;
        const Voxel v{x, y, z};
        for (std::size_t a = 0; a < 3; ++a) {
          box.lo[a] = std::min(box.lo[a], v[a]);
          box.hi[a] = std::max(box.hi[a], v[a] + 1);
        }
      }
  if (!any) throw ValidationError("gray-matter mask is empty");
  return box;
}

FmriVolume::FmriVolume(std::size_t timepoints, SpatialDims dims, std::vector<float> values)
    : timepoints_(timepoints), dims_(dims), values_(std::move(values)) {
  check_dims(dims_);
  if (timepoints_ < 2) throw ValidationError("volume needs at least 2 timepoints, got " + std::to_string(timepoints_));
  if (values_.size() != timepoints_ * dims_.voxels())
    throw ValidationError("volume has " + std::to_string(values_.size()) + " values, dims need " +
                          std::to_string(timepoints_ * dims_.voxels()));
  for (float v : values_)
    if (!std::isfinite(v)) throw ValidationError("volume contains a non-finite value");
}

void write_volume(const std::filesystem::path& path, const FmriVolume& volume, const GrayMatterMask& mask) {
  if (!(volume.dims() == mask.dims())) throw ValidationError("volume and mask spatial dims differ");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + path.string());
  os.write("ABFR", 4);
  os.put(static_cast<char>(kVolumeFormatVersion));
  io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(volume.timepoints()));
  io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(volume.dims().x));
  io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(volume.dims().y));
  io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(volume.dims().z));
  for (float v : volume.values()) io::write_f32(os, v);
  const auto bits = mask.values();
  std::vector<char> packed((bits.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < bits.size(); ++i)
    if (bits[i]) packed[i / 8] = static_cast<char>(packed[i / 8] | (1 << (i % 8)));
  os.write(packed.data(), static_cast<std::streamsize>(packed.size()));
  if (!os) throw Error("write failed for " + path.string());
}

VolumeFile read_volume(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ParseError(ParseErrorKind::io, "cannot open " + path.string());
  is.seekg(0, std::ios::end);
  const auto file_size = static_cast<std::uint64_t>(is.tellg());
  is.seekg(0);

  char magic[4];
  if (!is.read(magic, 4) || std::string(magic, 4) != "ABFR")
    throw ParseError(ParseErrorKind::bad_magic, path.string() + ": not an ABFR volume (bad magic)");
  const int version = is.get();
  if (version != kVolumeFormatVersion)
    throw ParseError(ParseErrorKind::bad_version, path.string() + ": unsupported version " + std::to_string(version));
  std::uint32_t dims[4];
  for (auto& d : dims)
    if (!io::read_le(is, d)) throw ParseError(ParseErrorKind::truncated, path.string() + ": truncated header");
  for (auto d : dims)
    if (d == 0) throw ParseError(ParseErrorKind::malformed, path.string() + ": zero dimension in header");

  const std::uint64_t voxels = std::uint64_t{dims[1]} * dims[2] * dims[3];
  if (voxels > kMaxVolumeValues || voxels * dims[0] > kMaxVolumeValues)
    throw ParseError(ParseErrorKind::dim_overflow, path.string() + ": header dims exceed the supported size");
  const std::uint64_t values = voxels * dims[0];
  const std::uint64_t payload = values * 4 + (voxels + 7) / 8;
  const std::uint64_t header = 4 + 1 + 16;
  if (file_size < header + payload)
    throw ParseError(ParseErrorKind::truncated, path.string() + ": header declares " + std::to_string(payload) +
                                                    " payload bytes, file holds " +
                                                    std::to_string(file_size - header));

  std::vector<float> data(values);
  for (auto& v : data)
    if (!io::read_f32(is, v)) throw ParseError(ParseErrorKind::truncated, path.string() + ": truncated voxel data");
  std::vector<char> packed((voxels + 7) / 8);
  if (!is.read(packed.data(), static_cast<std::streamsize>(packed.size())))
    throw ParseError(ParseErrorKind::truncated, path.string() + ": truncated mask");
  std::vector<std::uint8_t> bits(voxels);
  for (std::size_t i = 0; i < voxels; ++i) bits[i] = (packed[i / 8] >> (i % 8)) & 1;

  const SpatialDims sd{dims[1], dims[2], dims[3]};
  try {
    return {FmriVolume(dims[0], sd, std::move(data)), GrayMatterMask(sd, std::move(bits))};
  } catch (const ValidationError& e) {
    throw ParseError(ParseErrorKind::malformed, path.string() + ": " + e.what());
  }
}

}  // namespace abfr
