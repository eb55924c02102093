#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "pimrt/errors.hpp"

namespace pimrt {

// Modeled cost constants. Cycle charges are per tasklet; transfer charges
// are host-side wall time. All of them can be overridden from a config file.
struct CostParams {
  std::uint32_t mram_access_latency_cycles = 64;
  std::uint32_t mram_cycles_per_8_bytes = 1;
  std::uint32_t rect_test_cycles = 8;
  double broadcast_latency_s = 50e-6;
  double broadcast_bandwidth_bytes_s = 8.0 * 1073741824.0;  // 8 GiB/s
  double sg_latency_s = 50e-6;
  double sg_rank_bandwidth_bytes_s = 0.5 * 1073741824.0;    // per rank
};

struct MachineConfig {
  static constexpr std::uint32_t kMaxDpus = 2560;
  static constexpr std::uint32_t kMaxTasklets = 16;

  std::uint32_t num_dpus = 2540;
  std::uint32_t tasklets_per_dpu = 11;
  std::uint64_t mram_bytes_per_dpu = 64ull << 20;
  std::uint64_t wram_bytes_per_dpu = 64ull << 10;
  double clock_hz = 4.0e8;
  std::uint32_t dpus_per_rank = 64;
  CostParams cost;

  std::uint32_t num_ranks() const {
    return (num_dpus + dpus_per_rank - 1) / dpus_per_rank;
  }

  void validate() const {
    if (num_dpus < 1 || num_dpus > kMaxDpus)
      throw usage_error("MachineConfig: num_dpus must be in [1, " +
                        std::to_string(kMaxDpus) + "], got " +
                        std::to_string(num_dpus));
    if (tasklets_per_dpu < 1 || tasklets_per_dpu > kMaxTasklets)
      throw usage_error("MachineConfig: tasklets_per_dpu must be in [1, " +
                        std::to_string(kMaxTasklets) + "], got " +
                        std::to_string(tasklets_per_dpu));
    if (mram_bytes_per_dpu == 0 || wram_bytes_per_dpu == 0)
      throw usage_error("MachineConfig: memory capacities must be positive");
    if (clock_hz <= 0.0) throw usage_error("MachineConfig: clock_hz must be positive");
    if (dpus_per_rank < 1)
      throw usage_error("MachineConfig: dpus_per_rank must be >= 1");
    if (cost.broadcast_bandwidth_bytes_s <= 0.0 || cost.sg_rank_bandwidth_bytes_s <= 0.0)
      throw usage_error("MachineConfig: bandwidths must be positive");
    if (cost.broadcast_latency_s < 0.0 || cost.sg_latency_s < 0.0)
      throw usage_error("MachineConfig: latencies must be non-negative");
  }
};

enum class Segment : std::uint8_t {
  headers = 0,
  leaf_slice = 1,
  subtree = 2,
  query_batch = 3,
  results = 4,
};
inline constexpr std::size_t kSegmentCount = 5;

inline const char* segment_name(Segment s) {
  switch (s) {
    case Segment::headers: return "headers";
    case Segment::leaf_slice: return "leaf_slice";
    case Segment::subtree: return "subtree";
    case Segment::query_batch: return "query_batch";
    case Segment::results: return "results";
  }
  return "?";
}

enum class TransferKind : std::uint8_t { broadcast, scatter, gather };

inline const char* transfer_kind_name(TransferKind k) {
  switch (k) {
    case TransferKind::broadcast: return "broadcast";
    case TransferKind::scatter: return "scatter";
    case TransferKind::gather: return "gather";
  }
  return "?";
}

struct TransferRecord {
  TransferKind kind{};
  std::string label;             // what was moved, e.g. "query_batch"
  std::uint64_t payload_bytes = 0;    // logical size of the source buffer(s)
  std::uint64_t delivered_bytes = 0;  // bytes landing on (or leaving) DPUs
  double modeled_time_s = 0.0;
};

struct CounterTotals {
  std::uint64_t mram_bytes_read = 0;
  std::uint64_t mram_bytes_written = 0;
  std::uint64_t nodes_visited = 0;
  std::uint64_t rects_tested = 0;
};

struct KernelResult {
  double machine_seconds = 0.0;  // max over DPUs of per-DPU kernel seconds
  std::vector<double> per_dpu_seconds;
  CounterTotals delta;           // counter growth caused by this launch
};

using ByteBuffer = std::vector<std::byte>;
using SharedBuffer = std::shared_ptr<const ByteBuffer>;

namespace detail {

struct SegmentSlot {
  SharedBuffer shared;  // read-only payload, may alias other DPUs
  ByteBuffer owned;     // writable storage (results)
  bool is_owned = false;

  std::size_t size() const {
    return is_owned ? owned.size() : (shared ? shared->size() : 0);
  }
  const std::byte* data() const {
    return is_owned ? owned.data() : (shared ? shared->data() : nullptr);
  }
};

}  // namespace detail

struct DpuState {
  std::array<detail::SegmentSlot, kSegmentCount> segments;
  std::vector<std::uint64_t> tasklet_cycles;  // reset at each launch
  std::uint64_t wram_used = 0;                // reset at each launch
  CounterTotals counters;                     // cumulative over the run

  std::uint64_t mram_used() const {
    std::uint64_t total = 0;
    for (const auto& s : segments) total += s.size();
    return total;
  }
};

class PimMachine;

// Per-DPU view handed to a kernel body. All memory traffic and compute the
// kernel wants accounted must go through the charge calls; segment data
// itself is host memory standing in for MRAM contents.
class DpuContext {
 public:
  DpuContext(DpuState& st, std::uint32_t dpu, const MachineConfig& cfg)
      : st_(st), dpu_(dpu), cfg_(cfg) {}

  std::uint32_t dpu_index() const { return dpu_; }
  std::uint32_t tasklet_count() const { return cfg_.tasklets_per_dpu; }
  const CostParams& cost() const { return cfg_.cost; }

  std::span<const std::byte> segment(Segment s) const {
    const auto& slot = st_.segments[static_cast<std::size_t>(s)];
    return {slot.data(), slot.size()};
  }

  std::span<std::byte> writable(Segment s) {
    auto& slot = st_.segments[static_cast<std::size_t>(s)];
    if (!slot.is_owned)
      throw usage_error(std::string("DPU ") + std::to_string(dpu_) +
                        ": segment '" + segment_name(s) +
                        "' is not writable (not allocated on-device)");
    return {slot.owned.data(), slot.owned.size()};
  }

  void charge_mram_read(std::uint32_t tasklet, std::uint64_t bytes) {
    st_.tasklet_cycles[tasklet] +=
        cfg_.cost.mram_access_latency_cycles +
        (bytes + 7) / 8 * cfg_.cost.mram_cycles_per_8_bytes;
    st_.counters.mram_bytes_read += bytes;
  }

  // Bulk form: `count` back-to-back record reads of equal size. Equivalent
  // to calling charge_mram_read that many times.
  void charge_mram_reads(std::uint32_t tasklet, std::uint64_t count,
                         std::uint64_t bytes_each) {
    st_.tasklet_cycles[tasklet] +=
        count * (cfg_.cost.mram_access_latency_cycles +
                 (bytes_each + 7) / 8 * cfg_.cost.mram_cycles_per_8_bytes);
    st_.counters.mram_bytes_read += count * bytes_each;
  }

  void charge_mram_write(std::uint32_t tasklet, std::uint64_t bytes) {
    st_.tasklet_cycles[tasklet] +=
        cfg_.cost.mram_access_latency_cycles +
        (bytes + 7) / 8 * cfg_.cost.mram_cycles_per_8_bytes;
    st_.counters.mram_bytes_written += bytes;
  }

  void charge_cycles(std::uint32_t tasklet, std::uint64_t cycles) {
    st_.tasklet_cycles[tasklet] += cycles;
  }

  void add_nodes_visited(std::uint64_t n) { st_.counters.nodes_visited += n; }
  void add_rects_tested(std::uint64_t n) { st_.counters.rects_tested += n; }

  // Declared WRAM footprint. The budget covers everything a real kernel
  // would pin in scratchpad for the whole launch.
  void wram_alloc(std::uint64_t bytes, const char* what) {
    st_.wram_used += bytes;
    if (st_.wram_used > cfg_.wram_bytes_per_dpu)
      throw capacity_error("DPU " + std::to_string(dpu_) +
                           ": WRAM budget exceeded allocating " +
                           std::to_string(bytes) + " bytes for " + what +
                           " (used " + std::to_string(st_.wram_used) + " of " +
                           std::to_string(cfg_.wram_bytes_per_dpu) + ")");
  }

 private:
  DpuState& st_;
  std::uint32_t dpu_;
  const MachineConfig& cfg_;
};

using KernelFn = std::function<void(DpuContext&)>;

// Bulk-synchronous machine model: the host broadcasts or scatters into
// per-DPU MRAM segments, launches a kernel on every DPU, and gathers
// results. DPUs never talk to each other. DPUs are evaluated one after
// another; their states are disjoint, so evaluation order cannot leak into
// results or counters.
class PimMachine {
 public:
  explicit PimMachine(MachineConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    dpus_.resize(cfg_.num_dpus);
    for (auto& d : dpus_) d.tasklet_cycles.assign(cfg_.tasklets_per_dpu, 0);
  }

  const MachineConfig& config() const { return cfg_; }
  std::uint32_t num_dpus() const { return cfg_.num_dpus; }
  const DpuState& dpu(std::uint32_t d) const { return dpus_.at(d); }
  const std::vector<TransferRecord>& transfers() const { return log_; }

  CounterTotals totals() const {
    CounterTotals t;
    for (const auto& d : dpus_) {
      t.mram_bytes_read += d.counters.mram_bytes_read;
      t.mram_bytes_written += d.counters.mram_bytes_written;
      t.nodes_visited += d.counters.nodes_visited;
      t.rects_tested += d.counters.rects_tested;
    }
    return t;
  }

  // Same payload to every DPU. Modeled time is flat in the DPU count.
  TransferRecord broadcast(Segment seg, SharedBuffer buf, std::string label) {
    const std::uint64_t bytes = buf ? buf->size() : 0;
    for (std::uint32_t d = 0; d < cfg_.num_dpus; ++d) {
      check_mram(d, seg, bytes);
      auto& slot = dpus_[d].segments[static_cast<std::size_t>(seg)];
      slot.shared = buf;
      slot.owned.clear();
      slot.is_owned = false;
    }
    TransferRecord rec{TransferKind::broadcast, std::move(label), bytes,
                       bytes * cfg_.num_dpus,
                       cfg_.cost.broadcast_latency_s +
                           static_cast<double>(bytes) /
                               cfg_.cost.broadcast_bandwidth_bytes_s};
    log_.push_back(rec);
    return rec;
  }

  // Distinct payload per DPU. Ranks move in parallel, DPUs within a rank
  // serially, so the modeled time follows the fullest rank.
  TransferRecord scatter(Segment seg, std::vector<ByteBuffer> per_dpu,
                         std::string label) {
    if (per_dpu.size() != cfg_.num_dpus)
      throw usage_error("scatter: got " + std::to_string(per_dpu.size()) +
                        " buffers for " + std::to_string(cfg_.num_dpus) +
                        " DPUs");
    std::uint64_t total = 0;
    std::uint64_t max_rank = 0;
    for (std::uint32_t r = 0; r < cfg_.num_ranks(); ++r) {
      std::uint64_t rank_bytes = 0;
      const std::uint32_t lo = r * cfg_.dpus_per_rank;
      const std::uint32_t hi =
          std::min((r + 1) * cfg_.dpus_per_rank, cfg_.num_dpus);
      for (std::uint32_t d = lo; d < hi; ++d) rank_bytes += per_dpu[d].size();
      total += rank_bytes;
      max_rank = std::max(max_rank, rank_bytes);
    }
    for (std::uint32_t d = 0; d < cfg_.num_dpus; ++d) {
      check_mram(d, seg, per_dpu[d].size());
      auto& slot = dpus_[d].segments[static_cast<std::size_t>(seg)];
      slot.shared = std::make_shared<const ByteBuffer>(std::move(per_dpu[d]));
      slot.owned.clear();
      slot.is_owned = false;
    }
    TransferRecord rec{TransferKind::scatter, std::move(label), total, total,
                       cfg_.cost.sg_latency_s +
                           static_cast<double>(max_rank) /
                               cfg_.cost.sg_rank_bandwidth_bytes_s};
    log_.push_back(rec);
    return rec;
  }

  // Zero-initialized writable storage, e.g. for result slots. Allocation is
  // a host-side layout step, not a data transfer, so nothing is logged.
  void alloc_segment(Segment seg, std::uint64_t bytes) {
    for (std::uint32_t d = 0; d < cfg_.num_dpus; ++d) {
      check_mram(d, seg, bytes);
      auto& slot = dpus_[d].segments[static_cast<std::size_t>(seg)];
      slot.shared.reset();
      slot.owned.assign(bytes, std::byte{0});
      slot.is_owned = true;
    }
  }

  std::pair<std::vector<ByteBuffer>, TransferRecord> gather(
      Segment seg, std::uint64_t bytes_per_dpu, std::string label) {
    std::vector<ByteBuffer> out(cfg_.num_dpus);
    for (std::uint32_t d = 0; d < cfg_.num_dpus; ++d) {
      const auto& slot = dpus_[d].segments[static_cast<std::size_t>(seg)];
      if (slot.size() < bytes_per_dpu)
        throw usage_error("gather: DPU " + std::to_string(d) + " segment '" +
                          segment_name(seg) + "' holds " +
                          std::to_string(slot.size()) + " bytes, requested " +
                          std::to_string(bytes_per_dpu));
      out[d].assign(slot.data(), slot.data() + bytes_per_dpu);
    }
    std::uint64_t max_rank = 0;
    for (std::uint32_t r = 0; r < cfg_.num_ranks(); ++r) {
      const std::uint32_t lo = r * cfg_.dpus_per_rank;
      const std::uint32_t hi =
          std::min((r + 1) * cfg_.dpus_per_rank, cfg_.num_dpus);
      max_rank = std::max<std::uint64_t>(max_rank,
                                         bytes_per_dpu * (hi - lo));
    }
    const std::uint64_t total = bytes_per_dpu * cfg_.num_dpus;
    TransferRecord rec{TransferKind::gather, std::move(label), total, total,
                       cfg_.cost.sg_latency_s +
                           static_cast<double>(max_rank) /
                               cfg_.cost.sg_rank_bandwidth_bytes_s};
    log_.push_back(rec);
    return {std::move(out), rec};
  }

  // Runs the kernel body once per DPU. Per-DPU kernel time is the slowest
  // tasklet's cycle total over the clock; machine time is the slowest DPU.
  KernelResult launch(const KernelFn& body) {
    KernelResult kr;
    kr.per_dpu_seconds.resize(cfg_.num_dpus, 0.0);
    for (std::uint32_t d = 0; d < cfg_.num_dpus; ++d) {
      DpuState& st = dpus_[d];
      st.tasklet_cycles.assign(cfg_.tasklets_per_dpu, 0);
      st.wram_used = 0;
      const CounterTotals before = st.counters;
      DpuContext ctx(st, d, cfg_);
      body(ctx);
      std::uint64_t worst = 0;
      for (const auto c : st.tasklet_cycles) worst = std::max(worst, c);
      kr.per_dpu_seconds[d] = static_cast<double>(worst) / cfg_.clock_hz;
      kr.machine_seconds = std::max(kr.machine_seconds, kr.per_dpu_seconds[d]);
      kr.delta.mram_bytes_read +=
          st.counters.mram_bytes_read - before.mram_bytes_read;
      kr.delta.mram_bytes_written +=
          st.counters.mram_bytes_written - before.mram_bytes_written;
      kr.delta.nodes_visited += st.counters.nodes_visited - before.nodes_visited;
      kr.delta.rects_tested += st.counters.rects_tested - before.rects_tested;
    }
    return kr;
  }

 private:
  void check_mram(std::uint32_t d, Segment seg, std::uint64_t incoming) {
    const DpuState& st = dpus_[d];
    const std::uint64_t existing =
        st.segments[static_cast<std::size_t>(seg)].size();
    const std::uint64_t would = st.mram_used() - existing + incoming;
    if (would > cfg_.mram_bytes_per_dpu)
      throw capacity_error(
          "DPU " + std::to_string(d) + ": MRAM capacity exceeded by segment '" +
          segment_name(seg) + "' (" + std::to_string(would) + " of " +
          std::to_string(cfg_.mram_bytes_per_dpu) + " bytes)");
  }

  MachineConfig cfg_;
  std::vector<DpuState> dpus_;
  std::vector<TransferRecord> log_;
};

// Plain key=value overrides, '#' starts a comment. Bandwidth keys take
// GiB/s to stay readable; they are stored as bytes/s.
inline MachineConfig load_machine_config(const std::string& path,
                                         MachineConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw io_error("load_machine_config: cannot open " + path);

  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw usage_error("config " + path + ":" + std::to_string(lineno) +
                        ": expected key=value, got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    try {
      if (key == "num_dpus") base.num_dpus = std::stoul(val);
      else if (key == "tasklets_per_dpu") base.tasklets_per_dpu = std::stoul(val);
      else if (key == "mram_bytes_per_dpu") base.mram_bytes_per_dpu = std::stoull(val);
      else if (key == "wram_bytes_per_dpu") base.wram_bytes_per_dpu = std::stoull(val);
      else if (key == "clock_hz") base.clock_hz = std::stod(val);
      else if (key == "dpus_per_rank") base.dpus_per_rank = std::stoul(val);
      else if (key == "mram_access_latency_cycles")
        base.cost.mram_access_latency_cycles = std::stoul(val);
      else if (key == "mram_cycles_per_8_bytes")
        base.cost.mram_cycles_per_8_bytes = std::stoul(val);
      else if (key == "rect_test_cycles") base.cost.rect_test_cycles = std::stoul(val);
      else if (key == "broadcast_latency_s") base.cost.broadcast_latency_s = std::stod(val);
      else if (key == "broadcast_bandwidth_gib_s")
        base.cost.broadcast_bandwidth_bytes_s = std::stod(val) * 1073741824.0;
      else if (key == "sg_latency_s") base.cost.sg_latency_s = std::stod(val);
      else if (key == "sg_rank_bandwidth_gib_s")
        base.cost.sg_rank_bandwidth_bytes_s = std::stod(val) * 1073741824.0;
      else
        throw usage_error("config " + path + ":" + std::to_string(lineno) +
                          ": unknown key '" + key + "'");
    } catch (const usage_error&) {
      throw;
    } catch (const std::logic_error&) {
      throw usage_error("config " + path + ":" + std::to_string(lineno) +
                        ": bad value '" + val + "' for " + key);
    }
  }
  base.validate();
  return base;
}

}  // namespace pimrt
