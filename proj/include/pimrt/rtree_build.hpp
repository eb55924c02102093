#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "pimrt/geometry.hpp"

namespace pimrt {

struct LeafEntry {
  Rect rect;
  std::uint32_t id = 0;  // position of the rect in the source dataset
};

struct RTreeNode {
  bool is_leaf = false;
  Mbr mbr{};
  std::vector<RTreeNode> children;   // internal nodes only
  std::vector<LeafEntry> entries;    // leaf nodes only

  std::size_t fanout() const { return children.size(); }
};

namespace detail {

inline std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) {
  return (a + b - 1) / b;
}

// Total order on entries by interval center along one axis. The doubled
// center avoids the halving division; ties fall back to the low edge and
// finally the dataset id so identical inputs always sort identically.
struct CenterLess {
  bool by_x;
  bool operator()(const LeafEntry& a, const LeafEntry& b) const {
    if (by_x) {
      const std::int64_t ca = std::int64_t{a.rect.xmin} + a.rect.xmax;
      const std::int64_t cb = std::int64_t{b.rect.xmin} + b.rect.xmax;
      if (ca != cb) return ca < cb;
      if (a.rect.xmin != b.rect.xmin) return a.rect.xmin < b.rect.xmin;
    } else {
      const std::int64_t ca = std::int64_t{a.rect.ymin} + a.rect.ymax;
      const std::int64_t cb = std::int64_t{b.rect.ymin} + b.rect.ymax;
      if (ca != cb) return ca < cb;
      if (a.rect.ymin != b.rect.ymin) return a.rect.ymin < b.rect.ymin;
    }
    return a.id < b.id;
  }
};

inline Mbr entries_mbr(std::span<const LeafEntry> es) {
  Mbr m = es[0].rect;
  for (std::size_t i = 1; i < es.size(); ++i) m = mbr_merge(m, es[i].rect);
  return m;
}

inline Mbr nodes_mbr(std::span<const RTreeNode> ns) {
  Mbr m = ns[0].mbr;
  for (std::size_t i = 1; i < ns.size(); ++i) m = mbr_merge(m, ns[i].mbr);
  return m;
}

inline RTreeNode make_leaf(std::span<const LeafEntry> es) {
  RTreeNode leaf;
  leaf.is_leaf = true;
  leaf.entries.assign(es.begin(), es.end());
  leaf.mbr = entries_mbr(es);
  return leaf;
}

inline std::vector<LeafEntry> to_entries(std::span<const Rect> rects) {
  std::vector<LeafEntry> es(rects.size());
  for (std::size_t i = 0; i < rects.size(); ++i)
    es[i] = LeafEntry{rects[i], static_cast<std::uint32_t>(i)};
  return es;
}

// Sort-tile-recursive packing of one level. Items are sorted by x center,
// cut into ceil(sqrt(target)) vertical slices whose capacity is a multiple
// of the group size, then each slice is sorted by y center and chopped into
// full groups. Exactly ceil(n / group) groups come out for every n.
template <class Item, class MakeGroup>
std::vector<RTreeNode> str_pack(std::vector<Item>& items, std::uint64_t group,
                                bool (*less_x)(const Item&, const Item&),
                                bool (*less_y)(const Item&, const Item&),
                                MakeGroup make_group) {
  const std::uint64_t n = items.size();
  const std::uint64_t total = ceil_div(n, group);
  const std::uint64_t slices = static_cast<std::uint64_t>(
      std::ceil(std::sqrt(static_cast<double>(n) / static_cast<double>(group))));
  const std::uint64_t slice_cap = ceil_div(total, std::max<std::uint64_t>(slices, 1)) * group;

  std::sort(items.begin(), items.end(), less_x);

  std::vector<RTreeNode> out;
  out.reserve(total);
  for (std::uint64_t lo = 0; lo < n; lo += slice_cap) {
    const std::uint64_t hi = std::min(lo + slice_cap, n);
    std::sort(items.begin() + lo, items.begin() + hi, less_y);
    for (std::uint64_t g = lo; g < hi; g += group)
      out.push_back(make_group(std::span<Item>(items.data() + g,
                                               std::min(g + group, hi) - g)));
  }
  return out;
}

inline bool entry_less_x(const LeafEntry& a, const LeafEntry& b) {
  return CenterLess{true}(a, b);
}
inline bool entry_less_y(const LeafEntry& a, const LeafEntry& b) {
  return CenterLess{false}(a, b);
}

// Level-1 packing reorders whole leaves; the sequence number keeps the
// comparator a total order when MBRs coincide.
struct PackedNode {
  RTreeNode node;
  std::uint32_t seq;
};

inline bool packed_less_x(const PackedNode& a, const PackedNode& b) {
  const std::int64_t ca = std::int64_t{a.node.mbr.xmin} + a.node.mbr.xmax;
  const std::int64_t cb = std::int64_t{b.node.mbr.xmin} + b.node.mbr.xmax;
  if (ca != cb) return ca < cb;
  if (a.node.mbr.xmin != b.node.mbr.xmin) return a.node.mbr.xmin < b.node.mbr.xmin;
  return a.seq < b.seq;
}
inline bool packed_less_y(const PackedNode& a, const PackedNode& b) {
  const std::int64_t ca = std::int64_t{a.node.mbr.ymin} + a.node.mbr.ymax;
  const std::int64_t cb = std::int64_t{b.node.mbr.ymin} + b.node.mbr.ymax;
  if (ca != cb) return ca < cb;
  if (a.node.mbr.ymin != b.node.mbr.ymin) return a.node.mbr.ymin < b.node.mbr.ymin;
  return a.seq < b.seq;
}

}  // namespace detail

// Three-level bulk load: a root of unbounded capacity over level-1 nodes of
// fanout <= F over leaves of capacity <= B. The level count is fixed even
// for a single rect, which keeps downstream layout logic branch-free.
inline RTreeNode build_str(std::span<const Rect> rects, std::uint32_t bundle_factor,
                           std::uint32_t fanout) {
  if (rects.empty()) throw usage_error("build_str: empty input");
  if (bundle_factor < 1) throw usage_error("build_str: bundle_factor must be >= 1");
  if (fanout < 2) throw usage_error("build_str: fanout must be >= 2");

  auto entries = detail::to_entries(rects);
  std::vector<RTreeNode> leaves = detail::str_pack(
      entries, bundle_factor, detail::entry_less_x, detail::entry_less_y,
      [](std::span<LeafEntry> g) { return detail::make_leaf(g); });

  std::vector<detail::PackedNode> packed;
  packed.reserve(leaves.size());
  for (std::uint32_t i = 0; i < leaves.size(); ++i)
    packed.push_back({std::move(leaves[i]), i});

  std::vector<RTreeNode> level1 = detail::str_pack(
      packed, fanout, detail::packed_less_x, detail::packed_less_y,
      [](std::span<detail::PackedNode> g) {
        RTreeNode n;
        n.is_leaf = false;
        n.children.reserve(g.size());
        for (auto& p : g) n.children.push_back(std::move(p.node));
        n.mbr = detail::nodes_mbr(n.children);
        return n;
      });

  RTreeNode root;
  root.is_leaf = false;
  root.mbr = detail::nodes_mbr(level1);
  root.children = std::move(level1);
  return root;
}

namespace detail {

// Top-down build with child count capped at `cap` on every level. Slabs get
// rect shares proportional to the groups they carry so group sizes stay
// within one of each other globally.
inline RTreeNode build_capped(std::span<LeafEntry> es, std::uint64_t cap,
                              std::uint32_t bundle_factor) {
  if (es.size() <= bundle_factor) return make_leaf(es);

  const std::uint64_t n = es.size();
  const std::uint64_t k = std::min<std::uint64_t>(cap, ceil_div(n, bundle_factor));
  const std::uint64_t s = static_cast<std::uint64_t>(
      std::ceil(std::sqrt(static_cast<double>(k))));

  std::sort(es.begin(), es.end(), CenterLess{true});

  RTreeNode node;
  node.is_leaf = false;
  node.children.reserve(k);

  std::uint64_t groups_done = 0;
  for (std::uint64_t slab = 0; slab < s && groups_done < k; ++slab) {
    std::uint64_t g = k / s + (slab < k % s ? 1 : 0);
    if (g == 0) continue;
    const std::uint64_t lo = n * groups_done / k;
    const std::uint64_t hi = n * (groups_done + g) / k;
    std::sort(es.begin() + lo, es.begin() + hi, CenterLess{false});

    const std::uint64_t slab_n = hi - lo;
    std::uint64_t taken = 0;
    for (std::uint64_t gi = 0; gi < g; ++gi) {
      const std::uint64_t sz = slab_n / g + (gi < slab_n % g ? 1 : 0);
      node.children.push_back(
          build_capped(es.subspan(lo + taken, sz), cap, bundle_factor));
      taken += sz;
    }
    groups_done += g;
  }
  node.mbr = nodes_mbr(node.children);
  return node;
}

}  // namespace detail

// Top-down build whose root fanout never exceeds num_partitions, so the root
// subtrees map one-to-one onto DPUs. num_partitions == 1 degenerates (one
// group can never shrink), so that case wraps a cap-2 build in a unary root.
inline RTreeNode build_fanout_constrained(std::span<const Rect> rects,
                                          std::uint32_t num_partitions,
                                          std::uint32_t bundle_factor) {
  if (rects.empty()) throw usage_error("build_fanout_constrained: empty input");
  if (num_partitions < 1)
    throw usage_error("build_fanout_constrained: num_partitions must be >= 1");
  if (bundle_factor < 1)
    throw usage_error("build_fanout_constrained: bundle_factor must be >= 1");

  auto entries = detail::to_entries(rects);
  if (entries.size() <= bundle_factor)
    return detail::make_leaf(std::span<LeafEntry>(entries));

  if (num_partitions == 1) {
    RTreeNode root;
    root.is_leaf = false;
    root.children.push_back(
        detail::build_capped(std::span<LeafEntry>(entries), 2, bundle_factor));
    root.mbr = root.children[0].mbr;
    return root;
  }
  return detail::build_capped(std::span<LeafEntry>(entries), num_partitions,
                              bundle_factor);
}

// Order-sensitive digest of the full tree structure and geometry. Used to
// check that query execution leaves the tree untouched.
inline std::uint64_t structural_hash(const RTreeNode& node) {
  constexpr std::uint64_t kPrime = 0x100000001b3ull;
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](std::uint64_t v) { h = (h ^ v) * kPrime; };
  mix(node.is_leaf ? 1 : 0);
  mix(static_cast<std::uint32_t>(node.mbr.xmin));
  mix(static_cast<std::uint32_t>(node.mbr.ymin));
  mix(static_cast<std::uint32_t>(node.mbr.xmax));
  mix(static_cast<std::uint32_t>(node.mbr.ymax));
  if (node.is_leaf) {
    mix(node.entries.size());
    for (const auto& e : node.entries) {
      mix(static_cast<std::uint32_t>(e.rect.xmin));
      mix(static_cast<std::uint32_t>(e.rect.ymin));
      mix(static_cast<std::uint32_t>(e.rect.xmax));
      mix(static_cast<std::uint32_t>(e.rect.ymax));
      mix(e.id);
    }
  } else {
    mix(node.children.size());
    for (const auto& c : node.children) mix(structural_hash(c));
  }
  return h;
}

}  // namespace pimrt
