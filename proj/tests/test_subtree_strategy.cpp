#include <catch2/catch_amalgamated.hpp>

#include <cstdint>
#include <random>
#include <vector>

#include "pimrt/cpu_engine.hpp"
#include "pimrt/subtree_strategy.hpp"

using namespace pimrt;

namespace {

std::vector<Rect> random_rects(std::mt19937_64& eng, std::size_t n,
                               std::int32_t span, std::int32_t extent) {
  std::vector<Rect> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = static_cast<std::int32_t>(eng() % span);
    const auto y = static_cast<std::int32_t>(eng() % span);
    out.push_back(Rect{x, y, x + static_cast<std::int32_t>(eng() % extent),
                       y + static_cast<std::int32_t>(eng() % extent)});
  }
  return out;
}

MachineConfig machine_of(std::uint32_t dpus, std::uint32_t tasklets) {
  MachineConfig cfg;
  cfg.num_dpus = dpus;
  cfg.tasklets_per_dpu = tasklets;
  return cfg;
}

std::uint64_t total_nodes(const SubtreePlacement& pl) {
  std::uint64_t n = 0;
  for (const auto& s : pl.subtrees) n += s.node_count();
  return n;
}

std::size_t count_label(std::span<const TransferRecord> ts, std::string_view l) {
  std::size_t n = 0;
  for (const auto& t : ts)
    if (t.label == l) ++n;
  return n;
}

}  // namespace

TEST_CASE("subtree execution equals the exhaustive scan") {
  std::mt19937_64 eng(211);
  for (int trial = 0; trial < 8; ++trial) {
    const std::size_t n = 5 + eng() % 3000;
    const std::size_t q = 1 + eng() % 400;
    const std::uint32_t p = 1 + eng() % 8;
    const std::uint32_t t = 1 + eng() % 11;
    CAPTURE(trial, n, q, p, t);
    const auto rects = random_rects(eng, n, 60000, 1500);
    const auto queries = random_rects(eng, q, 60000, 4000);

    PimMachine m(machine_of(p, t));
    const RTreeNode root = build_fanout_constrained(rects, p, 10);
    const SubtreePlacement pl = distribute_subtrees(root, m, 10);
    const QueryOutcome out = run_batches_subtree(pl, queries, m);
    REQUIRE(out.counts == brute_force(rects, queries));
  }
}

TEST_CASE("a query that misses everything touches one root per subtree") {
  std::mt19937_64 eng(223);
  const auto rects = random_rects(eng, 800, 60000, 500);
  PimMachine m(machine_of(6, 4));
  const RTreeNode root = build_fanout_constrained(rects, 6, 10);
  const SubtreePlacement pl = distribute_subtrees(root, m, 10);

  const std::vector<Rect> miss{
      Rect{2000000000, 2000000000, 2000000001, 2000000001}};
  const QueryOutcome out = run_batches_subtree(pl, miss, m);
  CHECK(out.counts == std::vector<std::uint64_t>{0});
  CHECK(out.profile.nodes_visited == pl.subtrees.size());
  CHECK(out.profile.rects_tested == 0);
}

TEST_CASE("pruning changes cost but never results") {
  std::mt19937_64 eng(227);
  const auto rects = random_rects(eng, 2000, 80000, 600);
  const auto queries = random_rects(eng, 250, 80000, 2000);

  SubtreeOptions with, without;
  without.prune_enabled = false;

  PimMachine m1(machine_of(5, 4));
  const RTreeNode r1 = build_fanout_constrained(rects, 5, 10);
  const SubtreePlacement p1 = distribute_subtrees(r1, m1, 10);
  const QueryOutcome on = run_batches_subtree(p1, queries, m1, with);

  PimMachine m2(machine_of(5, 4));
  const RTreeNode r2 = build_fanout_constrained(rects, 5, 10);
  const SubtreePlacement p2 = distribute_subtrees(r2, m2, 10);
  const QueryOutcome off = run_batches_subtree(p2, queries, m2, without);

  REQUIRE(on.counts == off.counts);
  CHECK(on.profile.nodes_visited <= off.profile.nodes_visited);

  // Without pruning every query walks every node of every subtree.
  CHECK(off.profile.nodes_visited == queries.size() * total_nodes(p2));
  CHECK(off.profile.rects_tested == queries.size() * rects.size());
}

TEST_CASE("retransmission resends the whole index every batch") {
  std::mt19937_64 eng(229);
  const auto rects = random_rects(eng, 600, 40000, 500);
  const auto queries = random_rects(eng, 25, 40000, 1500);
  SubtreeOptions opt;
  opt.batch_capacity = 10;  // 25 queries -> 3 batches

  PimMachine m1(machine_of(4, 3));
  const RTreeNode r1 = build_fanout_constrained(rects, 4, 10);
  const SubtreePlacement p1 = distribute_subtrees(r1, m1, 10, true);
  const QueryOutcome resent = run_batches_subtree(p1, queries, m1, opt);
  CHECK(count_label(p1.setup_transfers, "subtree") == 1);
  CHECK(count_label(resent.transfers, "subtree") == 3);

  PimMachine m2(machine_of(4, 3));
  const RTreeNode r2 = build_fanout_constrained(rects, 4, 10);
  const SubtreePlacement p2 = distribute_subtrees(r2, m2, 10, false);
  const QueryOutcome kept = run_batches_subtree(p2, queries, m2, opt);
  CHECK(count_label(p2.setup_transfers, "subtree") == 1);
  CHECK(count_label(kept.transfers, "subtree") == 0);

  REQUIRE(resent.counts == kept.counts);
  REQUIRE(resent.counts == brute_force(rects, queries));

  // Each resend moves the full set of subtree images again.
  for (const TransferRecord& t : resent.transfers)
    if (t.label == "subtree") CHECK(t.payload_bytes == p1.total_subtree_bytes());
}

TEST_CASE("DPUs beyond the subtree count stay idle but results are exact") {
  std::mt19937_64 eng(233);
  const auto rects = random_rects(eng, 50, 20000, 800);
  const auto queries = random_rects(eng, 40, 20000, 3000);

  PimMachine m(machine_of(8, 3));
  const RTreeNode root = build_fanout_constrained(rects, 3, 10);
  const SubtreePlacement pl = distribute_subtrees(root, m, 10);
  REQUIRE(pl.subtrees.size() <= 3);

  const QueryOutcome out = run_batches_subtree(pl, queries, m);
  REQUIRE(out.counts == brute_force(rects, queries));
  for (std::uint32_t d = static_cast<std::uint32_t>(pl.subtrees.size()); d < 8;
       ++d) {
    CHECK(m.dpu(d).counters.nodes_visited == 0);
    CHECK(m.dpu(d).counters.mram_bytes_read == 0);
  }
}

TEST_CASE("a dataset that fits one bundle runs as a single subtree") {
  const std::vector<Rect> rects{Rect{0, 0, 1, 1}, Rect{2, 2, 3, 3},
                                Rect{4, 4, 5, 5}};
  const std::vector<Rect> queries{Rect{0, 0, 5, 5}, Rect{9, 9, 10, 10}};
  PimMachine m(machine_of(4, 2));
  const RTreeNode root = build_fanout_constrained(rects, 4, 10);
  REQUIRE(root.is_leaf);
  const SubtreePlacement pl = distribute_subtrees(root, m, 10);
  REQUIRE(pl.subtrees.size() == 1);
  const QueryOutcome out = run_batches_subtree(pl, queries, m);
  CHECK(out.counts == std::vector<std::uint64_t>{3, 0});
}

TEST_CASE("the fixed traversal stack rejects trees deeper than its bound") {
  std::mt19937_64 eng(239);
  const auto rects = random_rects(eng, 200, 20000, 500);
  const std::vector<Rect> queries{Rect{0, 0, 20000, 20000}};
  PimMachine m(machine_of(2, 2));
  const RTreeNode root = build_fanout_constrained(rects, 2, 5);
  const SubtreePlacement pl = distribute_subtrees(root, m, 5);

  SubtreeOptions opt;
  opt.max_stack_depth = 1;  // root fits, its children do not
  CHECK_THROWS_AS(run_batches_subtree(pl, queries, m, opt), kernel_error);
}

TEST_CASE("more subtrees than DPUs is refused") {
  std::mt19937_64 eng(241);
  const auto rects = random_rects(eng, 200, 20000, 500);
  const RTreeNode root = build_fanout_constrained(rects, 8, 5);
  REQUIRE(root.children.size() == 8);
  PimMachine m(machine_of(4, 2));
  CHECK_THROWS_AS(distribute_subtrees(root, m, 5), usage_error);
}

TEST_CASE("subtree batch options are validated") {
  const std::vector<Rect> rects{Rect{0, 0, 1, 1}};
  const std::vector<Rect> queries{Rect{0, 0, 1, 1}};
  PimMachine m(machine_of(1, 1));
  const RTreeNode root = build_fanout_constrained(rects, 1, 10);
  const SubtreePlacement pl = distribute_subtrees(root, m, 10);
  SubtreeOptions zero_batch;
  zero_batch.batch_capacity = 0;
  CHECK_THROWS_AS(run_batches_subtree(pl, queries, m, zero_batch), usage_error);
  SubtreeOptions zero_stack;
  zero_stack.max_stack_depth = 0;
  CHECK_THROWS_AS(run_batches_subtree(pl, queries, m, zero_stack), usage_error);
}
