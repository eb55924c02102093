#pragma once

#include <cstdint>
#include <cstddef>
#include <cstring>

namespace pimrt {

// All on-disk and simulated-MRAM layouts are little-endian regardless of
// host order, so every field goes through these helpers.

inline void put_u32le(std::byte* p, std::uint32_t v) {
  p[0] = static_cast<std::byte>(v & 0xff);
  p[1] = static_cast<std::byte>((v >> 8) & 0xff);
  p[2] = static_cast<std::byte>((v >> 16) & 0xff);
  p[3] = static_cast<std::byte>((v >> 24) & 0xff);
}

inline std::uint32_t get_u32le(const std::byte* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

inline void put_i32le(std::byte* p, std::int32_t v) {
  put_u32le(p, static_cast<std::uint32_t>(v));
}

inline std::int32_t get_i32le(const std::byte* p) {
  return static_cast<std::int32_t>(get_u32le(p));
}

}  // namespace pimrt
