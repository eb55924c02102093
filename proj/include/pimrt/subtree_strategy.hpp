#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "pimrt/outcome.hpp"
#include "pimrt/pim_machine.hpp"
#include "pimrt/serialize.hpp"
#include "pimrt/strategy_util.hpp"

namespace pimrt {

struct SubtreeOptions {
  std::uint32_t batch_capacity = 10000;
  bool prune_enabled = true;      // off = descend everything, counts unchanged
  std::uint32_t max_stack_depth = 32;
};

// One root subtree per DPU. Each subtree is its own breadth-first record
// array sized to its own fanout; DPUs beyond the subtree count stay empty
// and contribute zero counts.
struct SubtreePlacement {
  bool retransmit_per_batch = true;
  std::vector<SerializedIndex> subtrees;
  std::vector<TransferRecord> setup_transfers;

  std::uint64_t total_subtree_bytes() const {
    std::uint64_t b = 0;
    for (const auto& s : subtrees) b += s.bytes().size();
    return b;
  }
  double setup_transfer_s() const {
    double s = 0.0;
    for (const auto& t : setup_transfers) s += t.modeled_time_s;
    return s;
  }
};

namespace detail {

inline std::uint32_t max_internal_fanout(const RTreeNode& n) {
  if (n.is_leaf) return 0;
  std::uint32_t f = static_cast<std::uint32_t>(n.children.size());
  for (const auto& c : n.children) f = std::max(f, max_internal_fanout(c));
  return f;
}

inline std::vector<ByteBuffer> subtree_buffers(const SubtreePlacement& pl,
                                               std::uint32_t num_dpus) {
  std::vector<ByteBuffer> bufs(num_dpus);
  for (std::size_t d = 0; d < pl.subtrees.size(); ++d)
    bufs[d] = pl.subtrees[d].bytes();
  return bufs;
}

}  // namespace detail

// Splits the tree at the root and scatters one serialized subtree per DPU.
// A leaf root (dataset no bigger than one bundle) becomes a single subtree
// on DPU 0.
inline SubtreePlacement distribute_subtrees(const RTreeNode& root,
                                            PimMachine& machine,
                                            std::uint32_t bundle_factor,
                                            bool retransmit_per_batch = true) {
  SubtreePlacement pl;
  pl.retransmit_per_batch = retransmit_per_batch;

  std::vector<const RTreeNode*> roots;
  if (root.is_leaf) {
    roots.push_back(&root);
  } else {
    if (root.children.size() > machine.num_dpus())
      throw usage_error("distribute_subtrees: " +
                        std::to_string(root.children.size()) +
                        " subtrees exceed " +
                        std::to_string(machine.num_dpus()) + " DPUs");
    for (const auto& c : root.children) roots.push_back(&c);
  }

  pl.subtrees.reserve(roots.size());
  for (const RTreeNode* r : roots) {
    const std::uint32_t f = std::max<std::uint32_t>(1, detail::max_internal_fanout(*r));
    pl.subtrees.push_back(serialize_bfs(*r, bundle_factor, f));
  }

  pl.setup_transfers.push_back(machine.scatter(
      Segment::subtree, detail::subtree_buffers(pl, machine.num_dpus()),
      "subtree"));
  return pl;
}

// Depth-first traversal over the serialized subtree, one MRAM record read
// per visited node, pruning at MBRs unless disabled. The depth bound stands
// in for the fixed on-device stack.
inline void subtree_kernel(DpuContext& ctx, const SubtreePlacement& pl,
                           std::uint32_t batch_size, bool prune_enabled,
                           std::uint32_t max_stack_depth) {
  const std::uint32_t d = ctx.dpu_index();
  const std::uint32_t T = ctx.tasklet_count();

  // Per-tasklet scratch plus a fixed-depth frame stack plus count staging.
  ctx.wram_alloc(std::uint64_t{T} * detail::kTaskletStateBytes, "tasklet state");
  ctx.wram_alloc(std::uint64_t{T} * max_stack_depth * 16, "traversal stacks");
  ctx.wram_alloc(std::uint64_t{batch_size} * 4, "count buffer");
  if (batch_size == 0) return;
  if (d >= pl.subtrees.size()) return;  // idle DPU, counts stay zero

  const SerializedIndex& sub = pl.subtrees[d];
  const IndexParams& params = sub.params();
  const std::size_t node_bytes = sub.node_bytes();
  const std::size_t rect_base = 24 + 4ull * params.max_children;
  const std::span<const std::byte> tree = ctx.segment(Segment::subtree);
  const std::span<const std::byte> queries = ctx.segment(Segment::query_batch);
  const std::uint32_t test_cycles = ctx.cost().rect_test_cycles;
  std::span<std::byte> results = ctx.writable(Segment::results);

  struct Walker {
    const std::byte* base;
    std::size_t node_bytes;
    std::size_t rect_base;
    std::uint32_t node_count;
    std::uint32_t test_cycles;
    bool prune;
    std::uint32_t depth_limit;
    std::uint32_t dpu;
    // per-query tallies
    std::uint64_t tests = 0;
    std::uint64_t visited = 0;
    std::uint64_t tested = 0;

    std::uint32_t visit(DpuContext& ctx, std::uint32_t t, const Rect& q,
                        std::uint32_t idx, std::uint32_t depth) {
      if (depth > depth_limit)
        throw kernel_error("DPU " + std::to_string(dpu) +
                           ": traversal stack exceeded depth " +
                           std::to_string(depth_limit));
      if (idx >= node_count)
        throw kernel_error("DPU " + std::to_string(dpu) +
                           ": node index out of range");
      const std::byte* p = base + std::size_t{idx} * node_bytes;
      ctx.charge_mram_read(t, node_bytes);
      ++visited;
      if (prune) {
        tests += test_cycles;
        const Rect mbr = detail::read_rect(p + 8);
        if (!overlaps(q, mbr)) return 0;
      }
      const std::uint32_t n = get_u32le(p + 4);
      std::uint32_t count = 0;
      if (get_u32le(p) != 0) {  // leaf
        const std::byte* r = p + rect_base;
        for (std::uint32_t j = 0; j < n; ++j, r += 16)
          if (overlaps(q, detail::read_rect(r))) ++count;
        tested += n;
      } else {
        for (std::uint32_t j = 0; j < n; ++j) {
          const std::int32_t c = get_i32le(p + 24 + 4ull * j);
          count += visit(ctx, t, q, static_cast<std::uint32_t>(c), depth + 1);
        }
      }
      return count;
    }
  };

  const std::uint32_t block = (batch_size + T - 1) / T;
  for (std::uint32_t t = 0; t < T; ++t) {
    const std::uint32_t q_lo = t * block;
    const std::uint32_t q_hi = std::min(q_lo + block, batch_size);
    if (q_lo >= q_hi) break;

    Walker w{tree.data(), node_bytes, rect_base, sub.node_count(),
             test_cycles, prune_enabled, max_stack_depth, d};
    for (std::uint32_t qi = q_lo; qi < q_hi; ++qi) {
      const Rect q = detail::read_rect(queries.data() + std::size_t{qi} * 16);
      const std::uint32_t count = w.visit(ctx, t, q, 0, 1);
      put_u32le(results.data() + std::size_t{qi} * 4, count);
    }
    ctx.charge_cycles(t, w.tests + w.tested * test_cycles);
    ctx.add_nodes_visited(w.visited);
    ctx.add_rects_tested(w.tested);
    ctx.charge_mram_write(t, std::uint64_t{q_hi - q_lo} * 4);
  }
}

// Batch loop for the subtree layout. With retransmit_per_batch set (the
// default, matching the measured system) the whole set of subtrees is
// rescattered before every batch, which is what makes this strategy
// communication-bound as the batch count grows.
inline QueryOutcome run_batches_subtree(const SubtreePlacement& pl,
                                        std::span<const Rect> queries,
                                        PimMachine& machine,
                                        const SubtreeOptions& opt = {}) {
  if (opt.batch_capacity < 1)
    throw usage_error("run_batches_subtree: batch_capacity must be >= 1");
  if (opt.max_stack_depth < 1)
    throw usage_error("run_batches_subtree: max_stack_depth must be >= 1");

  QueryOutcome out;
  out.counts.assign(queries.size(), 0);
  if (queries.empty()) return out;

  machine.alloc_segment(Segment::results,
                        std::uint64_t{opt.batch_capacity} * 4);

  const std::uint64_t total = queries.size();
  std::uint32_t batch_index = 0;
  for (std::uint64_t lo = 0; lo < total; lo += opt.batch_capacity, ++batch_index) {
    const std::uint32_t size =
        static_cast<std::uint32_t>(std::min<std::uint64_t>(opt.batch_capacity,
                                                           total - lo));
    double transfer_s = 0.0;
    if (pl.retransmit_per_batch) {
      const TransferRecord resent = machine.scatter(
          Segment::subtree, detail::subtree_buffers(pl, machine.num_dpus()),
          "subtree");
      transfer_s += resent.modeled_time_s;
      out.transfers.push_back(resent);
    }

    auto buf = std::make_shared<const ByteBuffer>(
        detail::pack_queries(queries.subspan(lo, size)));
    const TransferRecord sent =
        machine.broadcast(Segment::query_batch, std::move(buf), "query_batch");
    transfer_s += sent.modeled_time_s;
    out.transfers.push_back(sent);

    const KernelResult kr = machine.launch([&pl, size, &opt](DpuContext& ctx) {
      subtree_kernel(ctx, pl, size, opt.prune_enabled, opt.max_stack_depth);
    });

    auto [partials, got] =
        machine.gather(Segment::results, std::uint64_t{size} * 4, "results");
    detail::sum_counts(partials, size,
                       std::span<std::uint64_t>(out.counts).subspan(lo, size));

    out.batches.push_back(BatchBreakdown{batch_index, transfer_s,
                                         kr.machine_seconds,
                                         got.modeled_time_s});
    out.transfers.push_back(got);
    out.profile.bytes_read += kr.delta.mram_bytes_read;
    out.profile.bytes_written += kr.delta.mram_bytes_written;
    out.profile.nodes_visited += kr.delta.nodes_visited;
    out.profile.rects_tested += kr.delta.rects_tested;
    out.profile.kernel_s += kr.machine_seconds;
  }
  return out;
}

}  // namespace pimrt
