#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pimrt/bytes.hpp"
#include "pimrt/geometry.hpp"
#include "pimrt/pim_machine.hpp"

namespace pimrt::detail {

// Fixed per-tasklet scratchpad reservation (stack, registers spill area).
inline constexpr std::uint64_t kTaskletStateBytes = 256;

inline Rect read_rect(const std::byte* p) {
  return Rect{get_i32le(p), get_i32le(p + 4), get_i32le(p + 8),
              get_i32le(p + 12)};
}

// Queries travel as packed 16-byte little-endian records.
inline ByteBuffer pack_queries(std::span<const Rect> qs) {
  ByteBuffer buf(qs.size() * 16);
  std::byte* p = buf.data();
  for (const Rect& q : qs) {
    put_i32le(p, q.xmin);
    put_i32le(p + 4, q.ymin);
    put_i32le(p + 8, q.xmax);
    put_i32le(p + 12, q.ymax);
    p += 16;
  }
  return buf;
}

// Per-DPU u32 partials summed into 64-bit totals on the host.
inline void sum_counts(const std::vector<ByteBuffer>& per_dpu,
                       std::uint32_t batch_size,
                       std::span<std::uint64_t> out) {
  for (const ByteBuffer& buf : per_dpu)
    for (std::uint32_t qi = 0; qi < batch_size; ++qi)
      out[qi] += get_u32le(buf.data() + std::size_t{qi} * 4);
}

}  // namespace pimrt::detail
