#pragma once

#include <cstdint>
#include <deque>
#include <fstream>
#include <string>
#include <vector>

#include "pimrt/bytes.hpp"
#include "pimrt/errors.hpp"
#include "pimrt/rtree_build.hpp"

namespace pimrt {

// Fixed per-record capacities of a serialized index. Every record carries
// both a child-slot array and a rect-slot array so node position alone
// determines the byte offset.
struct IndexParams {
  std::uint32_t n_rects = 0;
  std::uint32_t max_rects = 0;     // leaf rect slots per record
  std::uint32_t max_children = 0;  // child index slots per record
};

inline std::size_t node_record_bytes(const IndexParams& p) {
  // is_leaf + count + mbr + child slots + rect slots, padded to 8 bytes.
  const std::size_t raw = 4 + 4 + 16 + 4ull * p.max_children + 16ull * p.max_rects;
  return (raw + 7) / 8 * 8;
}

// Read-only cursor over one record inside a serialized buffer.
class SerializedNodeView {
 public:
  SerializedNodeView(const std::byte* p, const IndexParams& params)
      : p_(p), params_(&params) {}

  bool is_leaf() const { return get_u32le(p_) != 0; }
  std::uint32_t count() const { return get_u32le(p_ + 4); }
  Mbr mbr() const {
    return Mbr{get_i32le(p_ + 8), get_i32le(p_ + 12), get_i32le(p_ + 16),
               get_i32le(p_ + 20)};
  }
  std::int32_t child(std::uint32_t j) const {
    return get_i32le(p_ + 24 + 4ull * j);
  }
  Rect rect(std::uint32_t j) const {
    const std::byte* r = p_ + 24 + 4ull * params_->max_children + 16ull * j;
    return Rect{get_i32le(r), get_i32le(r + 4), get_i32le(r + 8),
                get_i32le(r + 12)};
  }

 private:
  const std::byte* p_;
  const IndexParams* params_;
};

// Breadth-first array-of-records image of an R-tree. Node 0 is the root;
// children of earlier nodes always precede children of later ones, so each
// parent's children occupy one contiguous index range.
class SerializedIndex {
 public:
  SerializedIndex() = default;
  SerializedIndex(IndexParams params, std::uint32_t node_count,
                  std::uint32_t leaf_start, std::vector<std::byte> bytes)
      : params_(params),
        node_count_(node_count),
        leaf_start_(leaf_start),
        bytes_(std::move(bytes)) {}

  const IndexParams& params() const { return params_; }
  std::uint32_t node_count() const { return node_count_; }
  std::uint32_t leaf_start() const { return leaf_start_; }
  std::size_t node_bytes() const { return node_record_bytes(params_); }
  const std::vector<std::byte>& bytes() const { return bytes_; }

  SerializedNodeView node(std::uint32_t i) const {
    return SerializedNodeView(bytes_.data() + i * node_bytes(), params_);
  }

 private:
  IndexParams params_{};
  std::uint32_t node_count_ = 0;
  std::uint32_t leaf_start_ = 0;
  std::vector<std::byte> bytes_;
};

// Lays the tree out breadth-first. A leaf holding more than max_rects rects
// or a non-root internal node with more than `fanout` children cannot be
// represented and raises serialization_error. The root is exempt from the
// fanout cap (bulk loads leave its capacity unbounded); the slot array is
// widened to fit it and the widened value becomes the recorded capacity.
inline SerializedIndex serialize_bfs(const RTreeNode& root,
                                     std::uint32_t bundle_factor,
                                     std::uint32_t fanout) {
  std::vector<const RTreeNode*> order;
  std::deque<const RTreeNode*> queue{&root};
  while (!queue.empty()) {
    const RTreeNode* n = queue.front();
    queue.pop_front();
    order.push_back(n);
    if (!n->is_leaf)
      for (const auto& c : n->children) queue.push_back(&c);
  }

  IndexParams params;
  params.max_rects = bundle_factor;
  params.max_children = fanout;
  if (!root.is_leaf)
    params.max_children =
        std::max<std::uint32_t>(fanout, static_cast<std::uint32_t>(root.fanout()));

  std::uint32_t n_rects = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const RTreeNode* n = order[i];
    if (n->is_leaf) {
      if (n->entries.size() > params.max_rects)
        throw serialization_error(
            "serialize_bfs: leaf with " + std::to_string(n->entries.size()) +
            " rects exceeds capacity " + std::to_string(params.max_rects));
      n_rects += static_cast<std::uint32_t>(n->entries.size());
    } else if (i != 0 && n->children.size() > fanout) {
      throw serialization_error(
          "serialize_bfs: internal node with " +
          std::to_string(n->children.size()) + " children exceeds fanout " +
          std::to_string(fanout));
    }
  }
  params.n_rects = n_rects;

  const std::size_t rec = node_record_bytes(params);
  std::vector<std::byte> bytes(rec * order.size(), std::byte{0});

  // Child indices follow from BFS order: the first child of order[i] sits
  // right after all children assigned so far.
  std::uint32_t next_child = 1;
  std::uint32_t leaf_start = 0;
  bool seen_leaf = false;
  for (std::uint32_t i = 0; i < order.size(); ++i) {
    const RTreeNode* n = order[i];
    std::byte* p = bytes.data() + std::size_t{i} * rec;
    put_u32le(p, n->is_leaf ? 1 : 0);
    put_i32le(p + 8, n->mbr.xmin);
    put_i32le(p + 12, n->mbr.ymin);
    put_i32le(p + 16, n->mbr.xmax);
    put_i32le(p + 20, n->mbr.ymax);
    if (n->is_leaf) {
      put_u32le(p + 4, static_cast<std::uint32_t>(n->entries.size()));
      std::byte* r = p + 24 + 4ull * params.max_children;
      for (const auto& e : n->entries) {
        put_i32le(r, e.rect.xmin);
        put_i32le(r + 4, e.rect.ymin);
        put_i32le(r + 8, e.rect.xmax);
        put_i32le(r + 12, e.rect.ymax);
        r += 16;
      }
      if (!seen_leaf) {
        seen_leaf = true;
        leaf_start = i;
      }
    } else {
      put_u32le(p + 4, static_cast<std::uint32_t>(n->children.size()));
      for (std::uint32_t j = 0; j < n->children.size(); ++j)
        put_i32le(p + 24 + 4ull * j, static_cast<std::int32_t>(next_child + j));
      next_child += static_cast<std::uint32_t>(n->children.size());
    }
  }

  return SerializedIndex(params, static_cast<std::uint32_t>(order.size()),
                         leaf_start, std::move(bytes));
}

namespace detail {

inline RTreeNode rebuild(const SerializedIndex& si, std::uint32_t idx,
                         std::uint32_t& next_id) {
  const SerializedNodeView v = si.node(idx);
  RTreeNode n;
  n.is_leaf = v.is_leaf();
  n.mbr = v.mbr();
  if (n.is_leaf) {
    n.entries.resize(v.count());
    for (std::uint32_t j = 0; j < v.count(); ++j)
      n.entries[j] = LeafEntry{v.rect(j), next_id++};
  } else {
    n.children.reserve(v.count());
    for (std::uint32_t j = 0; j < v.count(); ++j) {
      const std::int32_t c = v.child(j);
      if (c <= 0 || static_cast<std::uint32_t>(c) >= si.node_count())
        throw serialization_error("deserialize: child index out of range");
      n.children.push_back(rebuild(si, static_cast<std::uint32_t>(c), next_id));
    }
  }
  return n;
}

}  // namespace detail

// Inverse of serialize_bfs up to record ids, which are not part of the
// serialized form; rebuilt entries get fresh sequential ids.
inline RTreeNode deserialize(const SerializedIndex& si) {
  if (si.node_count() == 0) throw usage_error("deserialize: empty index");
  std::uint32_t next_id = 0;
  return detail::rebuild(si, 0, next_id);
}

// True when the index is the exact three-level bulk-load shape: internal
// root, a run of internal level-1 nodes, then nothing but leaves.
inline bool is_three_level_str(const SerializedIndex& si) {
  if (si.node_count() < 3) return false;
  const SerializedNodeView root = si.node(0);
  if (root.is_leaf() || root.count() == 0) return false;
  const std::uint32_t c = root.count();
  if (si.leaf_start() != 1 + c) return false;
  if (si.node_count() <= si.leaf_start()) return false;
  for (std::uint32_t j = 0; j < c; ++j)
    if (root.child(j) != static_cast<std::int32_t>(1 + j)) return false;
  for (std::uint32_t i = 1; i <= c; ++i) {
    const SerializedNodeView n = si.node(i);
    if (n.is_leaf() || n.count() == 0) return false;
    for (std::uint32_t j = 0; j < n.count(); ++j) {
      const std::int32_t ch = n.child(j);
      if (ch < static_cast<std::int32_t>(si.leaf_start()) ||
          static_cast<std::uint32_t>(ch) >= si.node_count())
        return false;
    }
  }
  for (std::uint32_t i = si.leaf_start(); i < si.node_count(); ++i)
    if (!si.node(i).is_leaf()) return false;
  return true;
}

// Compact per-node summary broadcast to every DPU: 24 bytes per node for
// the root and each level-1 node, mirroring is_leaf/count/mbr exactly.
struct HeaderBlock {
  std::uint32_t entries = 0;
  std::vector<std::byte> bytes;

  static constexpr std::size_t kRecordBytes = 24;

  Mbr mbr(std::uint32_t i) const {
    const std::byte* p = bytes.data() + i * kRecordBytes;
    return Mbr{get_i32le(p + 8), get_i32le(p + 12), get_i32le(p + 16),
               get_i32le(p + 20)};
  }
  std::uint32_t count(std::uint32_t i) const {
    return get_u32le(bytes.data() + i * kRecordBytes + 4);
  }
  bool is_leaf(std::uint32_t i) const {
    return get_u32le(bytes.data() + i * kRecordBytes) != 0;
  }
};

inline HeaderBlock extract_headers(const SerializedIndex& si) {
  if (!is_three_level_str(si))
    throw usage_error("extract_headers: index is not a three-level bulk load");
  const std::uint32_t entries = 1 + si.node(0).count();
  HeaderBlock hb;
  hb.entries = entries;
  hb.bytes.resize(std::size_t{entries} * HeaderBlock::kRecordBytes);
  for (std::uint32_t i = 0; i < entries; ++i) {
    const SerializedNodeView v = si.node(i);
    std::byte* p = hb.bytes.data() + std::size_t{i} * HeaderBlock::kRecordBytes;
    put_u32le(p, v.is_leaf() ? 1 : 0);
    put_u32le(p + 4, v.count());
    const Mbr m = v.mbr();
    put_i32le(p + 8, m.xmin);
    put_i32le(p + 12, m.ymin);
    put_i32le(p + 16, m.xmax);
    put_i32le(p + 20, m.ymax);
  }
  return hb;
}

// Index file: 32-byte header then the record array, all little-endian.
inline constexpr char kIndexMagic[4] = {'P', 'R', 'T', 'S'};
inline constexpr std::uint32_t kIndexVersion = 1;

inline void save_index(const SerializedIndex& si, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("save_index: cannot open " + path);
  std::byte header[32] = {};
  std::memcpy(header, kIndexMagic, 4);
  put_u32le(header + 4, kIndexVersion);
  put_u32le(header + 8, si.params().n_rects);
  put_u32le(header + 12, si.params().max_rects);
  put_u32le(header + 16, si.params().max_children);
  put_u32le(header + 20, si.node_count());
  put_u32le(header + 24, si.leaf_start());
  out.write(reinterpret_cast<const char*>(header), sizeof header);
  out.write(reinterpret_cast<const char*>(si.bytes().data()),
            static_cast<std::streamsize>(si.bytes().size()));
  if (!out) throw io_error("save_index: write failed for " + path);
}

inline SerializedIndex load_index(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("load_index: cannot open " + path);
  std::byte header[32];
  in.read(reinterpret_cast<char*>(header), sizeof header);
  if (in.gcount() != sizeof header)
    throw io_error("load_index: truncated header in " + path);
  if (std::memcmp(header, kIndexMagic, 4) != 0)
    throw io_error("load_index: bad magic in " + path);
  if (get_u32le(header + 4) != kIndexVersion)
    throw io_error("load_index: unsupported version in " + path);

  IndexParams params;
  params.n_rects = get_u32le(header + 8);
  params.max_rects = get_u32le(header + 12);
  params.max_children = get_u32le(header + 16);
  const std::uint32_t node_count = get_u32le(header + 20);
  const std::uint32_t leaf_start = get_u32le(header + 24);

  const std::size_t expect = node_record_bytes(params) * node_count;
  std::vector<std::byte> bytes(expect);
  in.read(reinterpret_cast<char*>(bytes.data()),
          static_cast<std::streamsize>(expect));
  if (static_cast<std::size_t>(in.gcount()) != expect)
    throw io_error("load_index: truncated record array in " + path);
  return SerializedIndex(params, node_count, leaf_start, std::move(bytes));
}

}  // namespace pimrt
