#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>

#include "pimrt/errors.hpp"

namespace pimrt {

// Axis-aligned rectangle in scaled integer coordinates. Intervals are closed
// on both ends, so rects sharing only an edge or a corner still overlap.
struct Rect {
  std::int32_t xmin = 0;
  std::int32_t ymin = 0;
  std::int32_t xmax = 0;
  std::int32_t ymax = 0;

  bool valid() const { return xmin <= xmax && ymin <= ymax; }
  friend bool operator==(const Rect&, const Rect&) = default;
};

// Minimum bounding rectangle. Same representation, different role.
using Mbr = Rect;

inline bool overlaps(const Rect& a, const Rect& b) {
  return a.xmin <= b.xmax && b.xmin <= a.xmax &&
         a.ymin <= b.ymax && b.ymin <= a.ymax;
}

inline Mbr mbr_merge(const Mbr& a, const Mbr& b) {
  return Mbr{std::min(a.xmin, b.xmin), std::min(a.ymin, b.ymin),
             std::max(a.xmax, b.xmax), std::max(a.ymax, b.ymax)};
}

inline Mbr mbr_union(std::span<const Rect> rects) {
  if (rects.empty()) throw usage_error("mbr_union: empty rect sequence");
  Mbr m = rects[0];
  for (std::size_t i = 1; i < rects.size(); ++i) m = mbr_merge(m, rects[i]);
  return m;
}

inline bool contains(const Mbr& outer, const Rect& inner) {
  return outer.xmin <= inner.xmin && outer.ymin <= inner.ymin &&
         outer.xmax >= inner.xmax && outer.ymax >= inner.ymax;
}

// Fixed-precision mapping from decimal coordinates to the int32 grid.
struct ScaleSpec {
  std::uint32_t decimal_digits = 6;

  std::int64_t multiplier() const {
    std::int64_t m = 1;
    for (std::uint32_t i = 0; i < decimal_digits; ++i) m *= 10;
    return m;
  }
};

// Rounds half away from zero. Values whose scaled form leaves the int32
// range are rejected rather than clamped.
inline std::int32_t scale_coordinate(double value, const ScaleSpec& spec) {
  if (spec.decimal_digits > 9)
    throw usage_error("scale_coordinate: decimal_digits must be <= 9, got " +
                      std::to_string(spec.decimal_digits));
  const double scaled = value * static_cast<double>(spec.multiplier());
  if (!std::isfinite(scaled))
    throw value_range_error("scale_coordinate: non-finite input " +
                            std::to_string(value));
  const long long r = std::llround(scaled);
  if (r > INT32_MAX || r < INT32_MIN)
    throw value_range_error("scale_coordinate: " + std::to_string(value) +
                            " does not fit 32-bit range at " +
                            std::to_string(spec.decimal_digits) +
                            " decimal digits");
  return static_cast<std::int32_t>(r);
}

}  // namespace pimrt
