#pragma once

#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "pimrt/bytes.hpp"
#include "pimrt/errors.hpp"
#include "pimrt/geometry.hpp"

namespace pimrt {

// Rectangle ids are positional: rects[i] has id i.
struct Dataset {
  std::vector<Rect> rects;
  std::string source;
  ScaleSpec scale{};
  std::uint64_t normalized = 0;  // inputs whose min/max had to be swapped
};

namespace detail {

// mt19937_64 output is pinned by the standard; the modulo reduction keeps
// draws identical across library implementations.
inline std::uint64_t draw_below(std::mt19937_64& eng, std::uint64_t bound) {
  return eng() % bound;
}

inline const char* parse_double(const char* p, const char* end, double& out) {
  while (p < end && (*p == ' ' || *p == '\t')) ++p;
  const auto [next, ec] = std::from_chars(p, end, out);
  if (ec != std::errc()) return nullptr;
  p = next;
  while (p < end && (*p == ' ' || *p == '\t')) ++p;
  return p;
}

}  // namespace detail

// Text rows of `xmin,ymin,xmax,ymax` in decimal; blank lines and lines
// starting with '#' are skipped. Swapped min/max pairs are normalized and
// counted rather than rejected.
inline Dataset load_rects(const std::string& path, ScaleSpec scale = {}) {
  std::ifstream in(path);
  if (!in) throw io_error("load_rects: cannot open " + path);

  Dataset ds;
  ds.source = path;
  ds.scale = scale;

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos || line[b] == '#') continue;

    const char* p = line.data() + b;
    const char* end = line.data() + line.size();
    double vals[4];
    for (int i = 0; i < 4; ++i) {
      p = detail::parse_double(p, end, vals[i]);
      if (p == nullptr || (i < 3 && (p >= end || *p != ',')))
        throw io_error("load_rects: " + path + ":" + std::to_string(lineno) +
                       ": expected xmin,ymin,xmax,ymax");
      if (i < 3) ++p;
    }
    while (p < end && (*p == ' ' || *p == '\t' || *p == '\r')) ++p;
    if (p != end)
      throw io_error("load_rects: " + path + ":" + std::to_string(lineno) +
                     ": trailing characters after fourth coordinate");

    Rect r;
    try {
      r.xmin = scale_coordinate(vals[0], scale);
      r.ymin = scale_coordinate(vals[1], scale);
      r.xmax = scale_coordinate(vals[2], scale);
      r.ymax = scale_coordinate(vals[3], scale);
    } catch (const value_range_error& e) {
      throw value_range_error("load_rects: " + path + ":" +
                              std::to_string(lineno) + ": " + e.what());
    }
    bool swapped = false;
    if (r.xmin > r.xmax) { std::swap(r.xmin, r.xmax); swapped = true; }
    if (r.ymin > r.ymax) { std::swap(r.ymin, r.ymax); swapped = true; }
    if (swapped) ++ds.normalized;
    ds.rects.push_back(r);
  }
  if (ds.rects.empty())
    throw io_error("load_rects: " + path + " holds no rectangles");
  return ds;
}

// Synthetic rectangles already in scaled integer coordinates: positions
// uniform inside the universe, widths and heights uniform in
// [1, max_extent_fraction * universe extent]. Pure function of (args, seed).
inline Dataset gen_uniform(std::uint64_t n, std::uint64_t seed, Rect universe,
                           double max_extent_fraction) {
  if (n < 1) throw usage_error("gen_uniform: n must be >= 1");
  if (!(max_extent_fraction > 0.0) || max_extent_fraction > 1.0)
    throw usage_error("gen_uniform: max_extent_fraction must be in (0, 1]");
  if (!universe.valid() || universe.xmax == universe.xmin ||
      universe.ymax == universe.ymin)
    throw usage_error("gen_uniform: universe must have positive extent");

  const std::int64_t ext_x = std::int64_t{universe.xmax} - universe.xmin;
  const std::int64_t ext_y = std::int64_t{universe.ymax} - universe.ymin;
  const auto max_w = std::max<std::int64_t>(
      1, static_cast<std::int64_t>(max_extent_fraction * static_cast<double>(ext_x)));
  const auto max_h = std::max<std::int64_t>(
      1, static_cast<std::int64_t>(max_extent_fraction * static_cast<double>(ext_y)));

  Dataset ds;
  ds.source = "uniform(n=" + std::to_string(n) +
              ",seed=" + std::to_string(seed) + ")";
  ds.rects.reserve(n);
  std::mt19937_64 eng(seed);
  for (std::uint64_t i = 0; i < n; ++i) {
    const std::int64_t w =
        1 + static_cast<std::int64_t>(detail::draw_below(eng, max_w));
    const std::int64_t h =
        1 + static_cast<std::int64_t>(detail::draw_below(eng, max_h));
    const std::int64_t x =
        universe.xmin +
        static_cast<std::int64_t>(detail::draw_below(eng, ext_x - w + 1));
    const std::int64_t y =
        universe.ymin +
        static_cast<std::int64_t>(detail::draw_below(eng, ext_y - h + 1));
    ds.rects.push_back(Rect{static_cast<std::int32_t>(x),
                            static_cast<std::int32_t>(y),
                            static_cast<std::int32_t>(x + w),
                            static_cast<std::int32_t>(y + h)});
  }
  return ds;
}

// Query ranges are dataset rectangles drawn without replacement; the
// result order is itself randomized. floor(fraction * N) queries, with a
// small epsilon so fractions like 0.01 of a multiple of 100 stay exact.
inline std::vector<Rect> sample_queries(const Dataset& ds, double fraction,
                                        std::uint64_t seed) {
  if (!(fraction > 0.0) || fraction > 1.0)
    throw usage_error("sample_queries: fraction must be in (0, 1]");
  const std::uint64_t n = ds.rects.size();
  const auto m = static_cast<std::uint64_t>(
      fraction * static_cast<double>(n) + 1e-9);
  if (m == 0)
    throw usage_error("sample_queries: fraction " + std::to_string(fraction) +
                      " of " + std::to_string(n) + " rects yields no queries");

  std::vector<std::uint32_t> idx(n);
  for (std::uint64_t i = 0; i < n; ++i) idx[i] = static_cast<std::uint32_t>(i);

  std::mt19937_64 eng(seed);
  std::vector<Rect> out;
  out.reserve(m);
  for (std::uint64_t i = 0; i < m; ++i) {
    const std::uint64_t j = i + detail::draw_below(eng, n - i);
    std::swap(idx[i], idx[j]);
    out.push_back(ds.rects[idx[i]]);
  }
  return out;
}

inline constexpr char kDatasetMagic[4] = {'P', 'R', 'T', 'D'};
inline constexpr std::uint32_t kDatasetVersion = 1;

// Binary cache: 32-byte header then count packed 16-byte rects. Ids are
// positional, so they are not stored.
inline void save_rects(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("save_rects: cannot open " + path);
  std::byte header[32] = {};
  std::memcpy(header, kDatasetMagic, 4);
  put_u32le(header + 4, kDatasetVersion);
  put_u32le(header + 8, static_cast<std::uint32_t>(ds.rects.size()));
  put_u32le(header + 12, static_cast<std::uint32_t>(ds.scale.decimal_digits));
  out.write(reinterpret_cast<const char*>(header), sizeof header);

  std::vector<std::byte> body(ds.rects.size() * 16);
  std::byte* p = body.data();
  for (const Rect& r : ds.rects) {
    put_i32le(p, r.xmin);
    put_i32le(p + 4, r.ymin);
    put_i32le(p + 8, r.xmax);
    put_i32le(p + 12, r.ymax);
    p += 16;
  }
  out.write(reinterpret_cast<const char*>(body.data()),
            static_cast<std::streamsize>(body.size()));
  if (!out) throw io_error("save_rects: write failed for " + path);
}

inline Dataset load_rects_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("load_rects_binary: cannot open " + path);
  std::byte header[32];
  in.read(reinterpret_cast<char*>(header), sizeof header);
  if (in.gcount() != sizeof header)
    throw io_error("load_rects_binary: truncated header in " + path);
  if (std::memcmp(header, kDatasetMagic, 4) != 0)
    throw io_error("load_rects_binary: bad magic in " + path);
  if (get_u32le(header + 4) != kDatasetVersion)
    throw io_error("load_rects_binary: unsupported version in " + path);

  Dataset ds;
  ds.source = path;
  ds.scale.decimal_digits = static_cast<int>(get_u32le(header + 12));
  const std::uint32_t count = get_u32le(header + 8);
  if (count == 0)
    throw io_error("load_rects_binary: " + path + " holds no rectangles");

  std::vector<std::byte> body(std::size_t{count} * 16);
  in.read(reinterpret_cast<char*>(body.data()),
          static_cast<std::streamsize>(body.size()));
  if (static_cast<std::size_t>(in.gcount()) != body.size())
    throw io_error("load_rects_binary: truncated rect array in " + path);

  ds.rects.reserve(count);
  const std::byte* p = body.data();
  for (std::uint32_t i = 0; i < count; ++i, p += 16)
    ds.rects.push_back(Rect{get_i32le(p), get_i32le(p + 4), get_i32le(p + 8),
                            get_i32le(p + 12)});
  return ds;
}

}  // namespace pimrt
