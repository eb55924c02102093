#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pimrt/broadcast_strategy.hpp"
#include "pimrt/cpu_engine.hpp"
#include "pimrt/errors.hpp"
#include "pimrt/outcome.hpp"
#include "pimrt/pim_machine.hpp"
#include "pimrt/rtree_build.hpp"
#include "pimrt/subtree_strategy.hpp"
#include "pimrt/workload.hpp"

namespace pimrt {

enum class Strategy : std::uint8_t {
  cpu_seq,
  cpu_par,
  pim_broadcast,
  pim_subtree,
  brute_force,
};

inline const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::cpu_seq: return "cpu-seq";
    case Strategy::cpu_par: return "cpu-par";
    case Strategy::pim_broadcast: return "pim-broadcast";
    case Strategy::pim_subtree: return "pim-subtree";
    case Strategy::brute_force: return "brute-force";
  }
  return "?";
}

inline Strategy parse_strategy(const std::string& s) {
  if (s == "cpu-seq") return Strategy::cpu_seq;
  if (s == "cpu-par") return Strategy::cpu_par;
  if (s == "pim-broadcast") return Strategy::pim_broadcast;
  if (s == "pim-subtree") return Strategy::pim_subtree;
  if (s == "brute-force") return Strategy::brute_force;
  throw usage_error("unknown strategy '" + s +
                    "' (expected cpu-seq, cpu-par, pim-broadcast, "
                    "pim-subtree, or brute-force)");
}

struct RunSpec {
  Strategy strategy = Strategy::pim_broadcast;
  std::uint32_t bundle_factor = 64;  // rects per leaf
  std::uint32_t fanout = 128;        // children per internal node (STR)
  std::uint32_t batch_capacity = 10000;
  bool filter_enabled = true;        // broadcast header screen
  bool prune_enabled = true;         // subtree MBR pruning
  bool retransmit_per_batch = true;  // subtree rescatter per batch
  std::uint32_t cpu_threads = 8;
  std::uint32_t cpu_chunk = 64;
  MachineConfig machine{};           // PIM strategies only
};

struct RunResult {
  QueryOutcome outcome;
  std::vector<TransferRecord> setup_transfers;  // distribution phase
  CounterTotals machine_totals;                 // cumulative MRAM counters
  double cpu_elapsed_s = 0.0;  // measured wall clock, CPU strategies only
  std::uint64_t index_bytes = 0;
};

// One strategy, end to end: build whatever index the strategy needs, place
// it, stream the queries, and hand back exact counts plus the modeled (or
// measured) cost picture.
inline RunResult execute(const RunSpec& spec, const Dataset& ds,
                         std::span<const Rect> queries) {
  RunResult res;
  switch (spec.strategy) {
    case Strategy::brute_force: {
      const auto t0 = std::chrono::steady_clock::now();
      res.outcome.counts = brute_force(ds.rects, queries);
      res.cpu_elapsed_s = std::chrono::duration<double>(
                              std::chrono::steady_clock::now() - t0).count();
      return res;
    }
    case Strategy::cpu_seq: {
      const RTreeNode root = build_str(ds.rects, spec.bundle_factor, spec.fanout);
      QueryBatchResult r = run_sequential(root, queries);
      res.outcome.counts = std::move(r.counts);
      res.cpu_elapsed_s = r.elapsed_s;
      return res;
    }
    case Strategy::cpu_par: {
      const RTreeNode root = build_str(ds.rects, spec.bundle_factor, spec.fanout);
      QueryBatchResult r =
          run_parallel(root, queries, spec.cpu_threads, spec.cpu_chunk);
      res.outcome.counts = std::move(r.counts);
      res.cpu_elapsed_s = r.elapsed_s;
      return res;
    }
    case Strategy::pim_broadcast: {
      const RTreeNode root = build_str(ds.rects, spec.bundle_factor, spec.fanout);
      const SerializedIndex si = serialize_bfs(root, spec.bundle_factor, spec.fanout);
      res.index_bytes = si.bytes().size();
      PimMachine machine(spec.machine);
      const BroadcastPlacement pl = distribute(si, machine);
      res.setup_transfers = pl.setup_transfers;
      BroadcastOptions opt;
      opt.batch_capacity = spec.batch_capacity;
      opt.filter_enabled = spec.filter_enabled;
      res.outcome = run_batches(pl, queries, machine, opt);
      res.machine_totals = machine.totals();
      return res;
    }
    case Strategy::pim_subtree: {
      const RTreeNode root = build_fanout_constrained(
          ds.rects, spec.machine.num_dpus, spec.bundle_factor);
      PimMachine machine(spec.machine);
      const SubtreePlacement pl = distribute_subtrees(
          root, machine, spec.bundle_factor, spec.retransmit_per_batch);
      res.index_bytes = pl.total_subtree_bytes();
      res.setup_transfers = pl.setup_transfers;
      SubtreeOptions opt;
      opt.batch_capacity = spec.batch_capacity;
      opt.prune_enabled = spec.prune_enabled;
      res.outcome = run_batches_subtree(pl, queries, machine, opt);
      res.machine_totals = machine.totals();
      return res;
    }
  }
  throw usage_error("execute: unhandled strategy");
}

}  // namespace pimrt
