#pragma once

// Little-endian scalar encoding independent of host byte order.

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>

namespace abfr::io {

template <typename U>
void write_le(std::ostream& os, U value) {
  char bytes[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
  os.write(bytes, sizeof(U));
}

template <typename U>
bool read_le(std::istream& is, U& value) {
  unsigned char bytes[sizeof(U)];
  if (!is.read(reinterpret_cast<char*>(bytes), sizeof(U))) return false;
  value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(bytes[i]) << (8 * i);
  return true;
}

inline void write_f32(std::ostream& os, float v) { write_le(os, std::bit_cast<std::uint32_t>(v)); }
inline void write_f64(std::ostream& os, double v) { write_le(os, std::bit_cast<std::uint64_t>(v)); }

inline bool read_f32(std::istream& is, float& v) {
  std::uint32_t u;
  if (!read_le(is, u)) return false;
  v = std::bit_cast<float>(u);
  return true;
}

inline bool read_f64(std::istream& is, double& v) {
  std::uint64_t u;
  if (!read_le(is, u)) return false;
  v = std::bit_cast<double>(u);
  return true;
}

}  // namespace abfr::io
