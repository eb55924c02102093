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

struct BroadcastOptions {
  std::uint32_t batch_capacity = 10000;
  bool filter_enabled = true;  // off = every query scans its whole slice
};

// Per-DPU share of the leaf level plus the level-1 nodes whose child
// ranges touch it. Cover sets are exact: a leaf in the slice always has its
// parent in the cover.
struct DpuSlice {
  std::uint32_t leaf_lo = 0;
  std::uint32_t leaf_count = 0;
  std::vector<std::uint32_t> cover;  // header indices, 1-based like the index
};

struct BroadcastPlacement {
  IndexParams params{};
  std::size_t node_bytes = 0;
  std::uint32_t level1_count = 0;  // c: header block holds 1 + c records
  std::uint32_t total_leaves = 0;
  std::vector<DpuSlice> slices;
  std::vector<TransferRecord> setup_transfers;

  std::uint64_t header_bytes() const {
    return std::uint64_t{1 + level1_count} * HeaderBlock::kRecordBytes;
  }
  double setup_transfer_s() const {
    double s = 0.0;
    for (const auto& t : setup_transfers) s += t.modeled_time_s;
    return s;
  }
};

// Splits the leaf level evenly across DPUs (slice d covers leaf positions
// [dL/P, (d+1)L/P)), broadcasts the header block once, and scatters each
// DPU its slice of serialized leaf records.
inline BroadcastPlacement distribute(const SerializedIndex& si,
                                     PimMachine& machine) {
  if (!is_three_level_str(si))
    throw usage_error("distribute: index is not a three-level bulk load");

  BroadcastPlacement pl;
  pl.params = si.params();
  pl.node_bytes = si.node_bytes();
  pl.level1_count = si.node(0).count();
  pl.total_leaves = si.node_count() - si.leaf_start();

  // Child ranges of level-1 nodes in leaf coordinates. BFS layout makes
  // them contiguous and ascending; verify rather than trust.
  std::vector<std::uint32_t> range_lo(pl.level1_count + 1, 0);
  for (std::uint32_t i = 1; i <= pl.level1_count; ++i) {
    const SerializedNodeView n = si.node(i);
    if (n.child(0) != static_cast<std::int32_t>(si.leaf_start() + range_lo[i - 1]))
      throw usage_error("distribute: leaf ranges are not contiguous");
    range_lo[i] = range_lo[i - 1] + n.count();
  }
  if (range_lo[pl.level1_count] != pl.total_leaves)
    throw usage_error("distribute: level-1 ranges do not cover the leaf level");

  const std::uint64_t P = machine.num_dpus();
  const std::uint64_t L = pl.total_leaves;
  pl.slices.resize(P);
  std::vector<ByteBuffer> slice_bufs(P);
  for (std::uint64_t d = 0; d < P; ++d) {
    const std::uint32_t lo = static_cast<std::uint32_t>(d * L / P);
    const std::uint32_t hi = static_cast<std::uint32_t>((d + 1) * L / P);
    DpuSlice& s = pl.slices[d];
    s.leaf_lo = lo;
    s.leaf_count = hi - lo;
    for (std::uint32_t i = 1; i <= pl.level1_count; ++i)
      if (range_lo[i - 1] < hi && range_lo[i] > lo) s.cover.push_back(i);
    const std::byte* base =
        si.bytes().data() + std::size_t{si.leaf_start() + lo} * pl.node_bytes;
    slice_bufs[d].assign(base, base + std::size_t{s.leaf_count} * pl.node_bytes);
  }

  const HeaderBlock hb = extract_headers(si);
  auto header_buf = std::make_shared<const ByteBuffer>(hb.bytes);
  pl.setup_transfers.push_back(
      machine.broadcast(Segment::headers, std::move(header_buf), "headers"));
  pl.setup_transfers.push_back(
      machine.scatter(Segment::leaf_slice, std::move(slice_bufs), "leaf_slice"));
  return pl;
}

namespace detail {

// Cover MBRs held in WRAM registers; larger covers re-check every header.
inline constexpr std::size_t kCoverLimit = 4;

}  // namespace detail

// Two-phase kernel. Phase 1 screens the query against the cover MBRs held
// in WRAM (falling back to all level-1 headers if the cover overflows its
// four-entry budget); only survivors pay for phase 2, a sequential MRAM
// scan of every leaf record in the slice testing every stored rect.
inline void broadcast_kernel(DpuContext& ctx, const BroadcastPlacement& pl,
                             std::uint32_t batch_size, bool filter_enabled) {
  const DpuSlice& slice = pl.slices[ctx.dpu_index()];
  const std::span<const std::byte> headers = ctx.segment(Segment::headers);
  const std::span<const std::byte> leaves = ctx.segment(Segment::leaf_slice);
  const std::span<const std::byte> queries = ctx.segment(Segment::query_batch);
  const std::uint32_t T = ctx.tasklet_count();
  const std::uint32_t test_cycles = ctx.cost().rect_test_cycles;

  // Whole-launch WRAM footprint: the shared header block, fixed per-tasklet
  // state, and the per-query count staging buffer.
  ctx.wram_alloc(pl.header_bytes(), "headers");
  ctx.wram_alloc(std::uint64_t{T} * detail::kTaskletStateBytes, "tasklet state");
  ctx.wram_alloc(std::uint64_t{batch_size} * 4, "count buffer");
  if (batch_size == 0) return;

  // Tasklet 0 stages the headers from MRAM before the query loop.
  ctx.charge_mram_read(0, pl.header_bytes());

  auto header_mbr = [&](std::uint32_t i) {
    return detail::read_rect(headers.data() + std::size_t{i} * 24 + 8);
  };

  const bool cover_fallback = slice.cover.size() > detail::kCoverLimit;
  const std::size_t rect_base = 24 + 4ull * pl.params.max_children;

  const std::uint32_t block = (batch_size + T - 1) / T;
  std::span<std::byte> results = ctx.writable(Segment::results);

  for (std::uint32_t t = 0; t < T; ++t) {
    const std::uint32_t q_lo = t * block;
    const std::uint32_t q_hi = std::min(q_lo + block, batch_size);
    if (q_lo >= q_hi) break;

    std::uint64_t test_cycle_sum = 0;
    std::uint64_t visited = 0;
    std::uint64_t tested = 0;

    for (std::uint32_t qi = q_lo; qi < q_hi; ++qi) {
      const Rect q = detail::read_rect(queries.data() + std::size_t{qi} * 16);
      bool candidate = !filter_enabled;
      if (filter_enabled) {
        if (cover_fallback) {
          for (std::uint32_t i = 1; i <= pl.level1_count; ++i) {
            test_cycle_sum += test_cycles;
            if (overlaps(q, header_mbr(i))) { candidate = true; break; }
          }
        } else {
          for (const std::uint32_t i : slice.cover) {
            test_cycle_sum += test_cycles;
            if (overlaps(q, header_mbr(i))) { candidate = true; break; }
          }
        }
      }

      std::uint32_t count = 0;
      if (candidate && slice.leaf_count > 0) {
        ctx.charge_mram_reads(t, slice.leaf_count, pl.node_bytes);
        visited += slice.leaf_count;
        const std::byte* leaf = leaves.data();
        for (std::uint32_t l = 0; l < slice.leaf_count; ++l, leaf += pl.node_bytes) {
          const std::uint32_t nrects = get_u32le(leaf + 4);
          const std::byte* r = leaf + rect_base;
          for (std::uint32_t j = 0; j < nrects; ++j, r += 16)
            if (overlaps(q, detail::read_rect(r))) ++count;
          tested += nrects;
        }
      }
      put_u32le(results.data() + std::size_t{qi} * 4, count);
    }

    test_cycle_sum += tested * test_cycles;
    ctx.charge_cycles(t, test_cycle_sum);
    ctx.add_nodes_visited(visited);
    ctx.add_rects_tested(tested);
    // One bulk write per tasklet block flushes the staged counts.
    ctx.charge_mram_write(t, std::uint64_t{q_hi - q_lo} * 4);
  }
}

// Streams the query set through the machine in batches: broadcast the
// batch, launch the kernel, gather per-DPU partial counts, sum on the
// host. The index itself moves only once, at distribute time.
inline QueryOutcome run_batches(const BroadcastPlacement& pl,
                                std::span<const Rect> queries,
                                PimMachine& machine,
                                const BroadcastOptions& opt = {}) {
  if (opt.batch_capacity < 1)
    throw usage_error("run_batches: batch_capacity must be >= 1");

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
    auto buf = std::make_shared<const ByteBuffer>(
        detail::pack_queries(queries.subspan(lo, size)));
    const TransferRecord sent =
        machine.broadcast(Segment::query_batch, std::move(buf), "query_batch");

    const KernelResult kr = machine.launch([&pl, size, &opt](DpuContext& ctx) {
      broadcast_kernel(ctx, pl, size, opt.filter_enabled);
    });

    auto [partials, got] =
        machine.gather(Segment::results, std::uint64_t{size} * 4, "results");
    detail::sum_counts(partials, size,
                       std::span<std::uint64_t>(out.counts).subspan(lo, size));

    out.batches.push_back(BatchBreakdown{batch_index, sent.modeled_time_s,
                                         kr.machine_seconds,
                                         got.modeled_time_s});
    out.transfers.push_back(sent);
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
