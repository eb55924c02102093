#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "pimrt/rtree_build.hpp"

using namespace pimrt;

namespace {

std::vector<Rect> random_rects(std::mt19937_64& eng, std::size_t n,
                               std::int32_t span = 100000) {
  std::vector<Rect> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = static_cast<std::int32_t>(eng() % span);
    const auto y = static_cast<std::int32_t>(eng() % span);
    const auto w = static_cast<std::int32_t>(eng() % 1000);
    const auto h = static_cast<std::int32_t>(eng() % 1000);
    out.push_back(Rect{x, y, x + w, y + h});
  }
  return out;
}

std::size_t count_leaves(const RTreeNode& n) {
  if (n.is_leaf) return 1;
  std::size_t c = 0;
  for (const auto& ch : n.children) c += count_leaves(ch);
  return c;
}

void collect_leaf_depths(const RTreeNode& n, int depth, std::vector<int>& out) {
  if (n.is_leaf) {
    out.push_back(depth);
    return;
  }
  for (const auto& ch : n.children) collect_leaf_depths(ch, depth + 1, out);
}

// Recomputes every MBR from scratch and checks the stored ones, plus leaf
// capacity and child containment.
void check_mbrs(const RTreeNode& n, std::uint32_t bundle_factor) {
  if (n.is_leaf) {
    REQUIRE(!n.entries.empty());
    REQUIRE(n.entries.size() <= bundle_factor);
    Mbr m = n.entries[0].rect;
    for (const auto& e : n.entries) m = mbr_merge(m, e.rect);
    REQUIRE(n.mbr == m);
    return;
  }
  REQUIRE(!n.children.empty());
  Mbr m = n.children[0].mbr;
  for (const auto& c : n.children) {
    m = mbr_merge(m, c.mbr);
    REQUIRE(contains(n.mbr, c.mbr));
    check_mbrs(c, bundle_factor);
  }
  REQUIRE(n.mbr == m);
}

void collect_ids(const RTreeNode& n, std::vector<std::uint32_t>& out) {
  if (n.is_leaf) {
    for (const auto& e : n.entries) out.push_back(e.id);
    return;
  }
  for (const auto& c : n.children) collect_ids(c, out);
}

// Every dataset rect must land in exactly one leaf, unmodified.
void check_partition(const RTreeNode& root, const std::vector<Rect>& rects) {
  std::vector<std::uint32_t> ids;
  collect_ids(root, ids);
  REQUIRE(ids.size() == rects.size());
  std::sort(ids.begin(), ids.end());
  for (std::size_t i = 0; i < ids.size(); ++i) REQUIRE(ids[i] == i);
}

void max_fanouts(const RTreeNode& n, std::size_t& internal_max, int depth,
                 std::size_t& below_root_max) {
  if (n.is_leaf) return;
  internal_max = std::max(internal_max, n.children.size());
  if (depth > 0) below_root_max = std::max(below_root_max, n.children.size());
  for (const auto& c : n.children) max_fanouts(c, internal_max, depth + 1, below_root_max);
}

}  // namespace

TEST_CASE("bulk load packs 1000 rects into the documented shape") {
  std::mt19937_64 eng(7);
  const auto rects = random_rects(eng, 1000);
  const RTreeNode root = build_str(rects, 10, 10);

  REQUIRE_FALSE(root.is_leaf);
  CHECK(root.children.size() == 10);  // 100 leaves / fanout 10
  CHECK(count_leaves(root) == 100);   // ceil(1000 / 10)

  std::vector<int> depths;
  collect_leaf_depths(root, 0, depths);
  for (const int d : depths) REQUIRE(d == 2);

  check_mbrs(root, 10);
  check_partition(root, rects);
}

TEST_CASE("bulk load keeps three levels even for one rect") {
  const std::vector<Rect> one{Rect{5, 5, 6, 6}};
  const RTreeNode root = build_str(one, 10, 10);
  REQUIRE_FALSE(root.is_leaf);
  REQUIRE(root.children.size() == 1);
  REQUIRE_FALSE(root.children[0].is_leaf);
  REQUIRE(root.children[0].children.size() == 1);
  REQUIRE(root.children[0].children[0].is_leaf);
  CHECK(root.children[0].children[0].entries.size() == 1);
  CHECK(root.mbr == one[0]);
}

TEST_CASE("bulk load leaf count is always the ceiling of N over B") {
  std::mt19937_64 eng(11);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 1 + eng() % 3000;
    const std::uint32_t b = 1 + eng() % 16;
    const std::uint32_t f = 2 + eng() % 15;
    const auto rects = random_rects(eng, n);
    CAPTURE(n, b, f);
    const RTreeNode root = build_str(rects, b, f);
    REQUIRE(count_leaves(root) == (n + b - 1) / b);

    std::vector<int> depths;
    collect_leaf_depths(root, 0, depths);
    for (const int d : depths) REQUIRE(d == 2);

    // Below the root, fanout stays within F; the root absorbs the rest.
    std::size_t internal_max = 0, below_root = 0;
    max_fanouts(root, internal_max, 0, below_root);
    REQUIRE(below_root <= f);

    check_mbrs(root, b);
    check_partition(root, rects);
  }
}

TEST_CASE("bulk load handles duplicate coordinates deterministically") {
  const std::vector<Rect> same(57, Rect{10, 10, 20, 20});
  const RTreeNode root = build_str(same, 10, 10);
  REQUIRE(count_leaves(root) == 6);
  check_partition(root, same);
  check_mbrs(root, 10);
}

TEST_CASE("bulk load rejects bad parameters") {
  const std::vector<Rect> rects{Rect{0, 0, 1, 1}};
  CHECK_THROWS_AS(build_str({}, 10, 10), usage_error);
  CHECK_THROWS_AS(build_str(rects, 0, 10), usage_error);
  CHECK_THROWS_AS(build_str(rects, 10, 1), usage_error);
}

TEST_CASE("identical inputs build identical trees") {
  std::mt19937_64 eng(13);
  const auto rects = random_rects(eng, 2000);
  const std::uint64_t h1 = structural_hash(build_str(rects, 10, 10));
  const std::uint64_t h2 = structural_hash(build_str(rects, 10, 10));
  REQUIRE(h1 == h2);

  const std::uint64_t g1 = structural_hash(build_fanout_constrained(rects, 16, 10));
  const std::uint64_t g2 = structural_hash(build_fanout_constrained(rects, 16, 10));
  REQUIRE(g1 == g2);
}

TEST_CASE("partition-bounded build collapses small inputs to one leaf") {
  std::mt19937_64 eng(17);
  const auto rects = random_rects(eng, 8);
  const RTreeNode root = build_fanout_constrained(rects, 64, 10);
  REQUIRE(root.is_leaf);
  REQUIRE(root.entries.size() == 8);
  check_partition(root, rects);
}

TEST_CASE("partition-bounded build splits 100 rects four ways at P=4") {
  std::mt19937_64 eng(19);
  const auto rects = random_rects(eng, 100);
  const RTreeNode root = build_fanout_constrained(rects, 4, 10);
  REQUIRE_FALSE(root.is_leaf);
  // k = min(P, ceil(100/10)) = 4 root subtrees.
  REQUIRE(root.children.size() == 4);
  check_mbrs(root, 10);
  check_partition(root, rects);
}

TEST_CASE("partition-bounded build caps every internal fanout") {
  std::mt19937_64 eng(23);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 1 + eng() % 4000;
    const std::uint32_t p = 1 + eng() % 64;
    const std::uint32_t b = 1 + eng() % 12;
    const auto rects = random_rects(eng, n);
    CAPTURE(n, p, b);
    const RTreeNode root = build_fanout_constrained(rects, p, b);

    std::size_t internal_max = 0, below_root = 0;
    max_fanouts(root, internal_max, 0, below_root);
    if (!root.is_leaf) REQUIRE(root.children.size() <= p);
    REQUIRE(internal_max <= std::max<std::size_t>(p, 2));

    check_mbrs(root, b);
    check_partition(root, rects);
  }
}

TEST_CASE("partition-bounded build at P=1 still terminates and partitions") {
  std::mt19937_64 eng(29);
  const auto rects = random_rects(eng, 500);
  const RTreeNode root = build_fanout_constrained(rects, 1, 10);
  REQUIRE_FALSE(root.is_leaf);
  REQUIRE(root.children.size() == 1);
  check_mbrs(root, 10);
  check_partition(root, rects);
}

TEST_CASE("partition-bounded build rejects bad parameters") {
  const std::vector<Rect> rects{Rect{0, 0, 1, 1}};
  CHECK_THROWS_AS(build_fanout_constrained({}, 4, 10), usage_error);
  CHECK_THROWS_AS(build_fanout_constrained(rects, 0, 10), usage_error);
  CHECK_THROWS_AS(build_fanout_constrained(rects, 4, 0), usage_error);
}
