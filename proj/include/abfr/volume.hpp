#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace abfr {

struct SpatialDims {
  std::size_t x = 0, y = 0, z = 0;

  std::size_t voxels() const { return x * y * z; }
  std::size_t operator[](std::size_t axis) const { return axis == 0 ? x : axis == 1 ? y : z; }
  bool operator==(const SpatialDims&) const = default;
};

using Voxel = std::array<std::size_t, 3>;

// Half-open voxel box: lo inclusive, hi exclusive per axis.
struct BoundingBox {
  Voxel lo{};
  Voxel hi{};
};

class GrayMatterMask {
 public:
  GrayMatterMask() = default;
  // values: one byte per voxel, 0 or 1, x-major then y then z.
  GrayMatterMask(SpatialDims dims, std::vector<std::uint8_t> values);
  static GrayMatterMask filled(SpatialDims dims, bool on);

  const SpatialDims& dims() const { return dims_; }
  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const { return (x * dims_.y + y) * dims_.z + z; }
  bool at(std::size_t x, std::size_t y, std::size_t z) const { return values_[index(x, y, z)] != 0; }
  void set(std::size_t x, std::size_t y, std::size_t z, bool on) { values_[index(x, y, z)] = on ? 1 : 0; }
  std::span<const std::uint8_t> values() const { return values_; }
  std::size_t count() const;
  // Box around all mask-positive voxels. Throws if the mask is empty.
  BoundingBox bounding_box() const;

  bool operator==(const GrayMatterMask&) const = default;

 private:
  SpatialDims dims_;
  std::vector<std::uint8_t> values_;
};

// 4D BOLD signal stored timepoint-major: value(t, x, y, z) lives at
// ((t * X + x) * Y + y) * Z + z.
class FmriVolume {
 public:
  FmriVolume() = default;
  FmriVolume(std::size_t timepoints, SpatialDims dims, std::vector<float> values);

  std::size_t timepoints() const { return timepoints_; }
  const SpatialDims& dims() const { return dims_; }
  float at(std::size_t t, std::size_t x, std::size_t y, std::size_t z) const {
    return values_[((t * dims_.x + x) * dims_.y + y) * dims_.z + z];
  }
  std::span<const float> values() const { return values_; }
  std::span<float> mutable_values() { return values_; }
  // Values of timepoint t, laid out like GrayMatterMask::index.
  std::span<const float> frame(std::size_t t) const {
    return std::span<const float>(values_).subspan(t * dims_.voxels(), dims_.voxels());
  }

  bool operator==(const FmriVolume&) const = default;

 private:
  std::size_t timepoints_ = 0;
  SpatialDims dims_;
  std::vector<float> values_;
};

struct VolumeFile {
  FmriVolume volume;
  GrayMatterMask mask;
};

// Binary layout, all integers little-endian:
//   "ABFR" | u8 version (=1) | u32 T | u32 X | u32 Y | u32 Z
//   | T*X*Y*Z float32 voxel values | ceil(X*Y*Z / 8) mask bytes (bit i%8 of byte i/8)
inline constexpr std::uint8_t kVolumeFormatVersion = 1;
// Upper bound on the voxel-value count a header may declare.
inline constexpr std::uint64_t kMaxVolumeValues = std::uint64_t{1} << 31;

void write_volume(const std::filesystem::path& path, const FmriVolume& volume, const GrayMatterMask& mask);
VolumeFile read_volume(const std::filesystem::path& path);

}  // namespace abfr
