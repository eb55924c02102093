#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pimrt/errors.hpp"
#include "pimrt/metrics.hpp"
#include "pimrt/outcome.hpp"
#include "pimrt/pim_machine.hpp"

namespace pimrt {

using ordered_json = nlohmann::ordered_json;

inline constexpr int kReportSchemaVersion = 1;

namespace detail {

inline std::uint64_t fnv1a64(std::span<const std::uint64_t> values) {
  std::uint64_t h = 14695981039346656037ull;
  for (const std::uint64_t v : values)
    for (int shift = 0; shift < 64; shift += 8) {
      h ^= (v >> shift) & 0xff;
      h *= 1099511628211ull;
    }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xf];
  return s;
}

// Shortest round-trip decimal text, same policy the JSON writer uses, so
// CSV and JSON agree on every value.
inline std::string double_text(double v) {
  char buf[32];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

}  // namespace detail

// Compact fingerprint of the per-query totals: a checksum for equality
// checks plus a power-of-two histogram for eyeballing selectivity.
inline ordered_json counts_digest(std::span<const std::uint64_t> counts) {
  std::uint64_t total = 0;
  std::vector<std::uint64_t> buckets;  // [0]=zero hits, [k]=2^(k-1)..2^k-1
  for (const std::uint64_t c : counts) {
    total += c;
    std::size_t b = 0;
    for (std::uint64_t v = c; v > 0; v >>= 1) ++b;
    if (b >= buckets.size()) buckets.resize(b + 1, 0);
    ++buckets[b];
  }
  ordered_json hist = ordered_json::object();
  for (std::size_t b = 0; b < buckets.size(); ++b) {
    if (buckets[b] == 0) continue;
    std::string key;
    if (b == 0) key = "0";
    else if (b == 1) key = "1";
    else key = std::to_string(1ull << (b - 1)) + "-" +
               std::to_string((1ull << b) - 1);
    hist[key] = buckets[b];
  }
  ordered_json d = ordered_json::object();
  d["queries"] = counts.size();
  d["total_hits"] = total;
  d["checksum_fnv1a64"] = detail::hex64(detail::fnv1a64(counts));
  d["histogram"] = std::move(hist);
  return d;
}

inline ordered_json transfer_json(const TransferRecord& t) {
  ordered_json j = ordered_json::object();
  j["kind"] = transfer_kind_name(t.kind);
  j["label"] = t.label;
  j["payload_bytes"] = t.payload_bytes;
  j["delivered_bytes"] = t.delivered_bytes;
  j["modeled_time_s"] = t.modeled_time_s;
  return j;
}

inline ordered_json machine_json(const MachineConfig& cfg) {
  ordered_json j = ordered_json::object();
  j["num_dpus"] = cfg.num_dpus;
  j["tasklets_per_dpu"] = cfg.tasklets_per_dpu;
  j["mram_bytes_per_dpu"] = cfg.mram_bytes_per_dpu;
  j["wram_bytes_per_dpu"] = cfg.wram_bytes_per_dpu;
  j["clock_hz"] = cfg.clock_hz;
  j["dpus_per_rank"] = cfg.dpus_per_rank;
  return j;
}

inline ordered_json energy_json(const EnergyReport& e) {
  ordered_json j = ordered_json::object();
  j["cpu_power_w"] = e.cpu_power_w;
  j["dpu_power_w"] = e.dpu_power_w;
  j["cpu_runtime_s"] = e.cpu_runtime_s;
  j["dpu_kernel_s"] = e.dpu_kernel_s;
  j["cpu_energy_kj"] = e.cpu_energy_kj;
  j["dpu_energy_kj"] = e.dpu_energy_kj;
  j["efficiency"] = e.efficiency;
  return j;
}

struct ReportInputs {
  ordered_json run = ordered_json::object();  // strategy, dataset, flags
  const QueryOutcome* outcome = nullptr;
  std::vector<TransferRecord> setup_transfers;
  const MachineConfig* machine = nullptr;  // absent for CPU-only runs
  const EnergyReport* energy = nullptr;
  double wall_clock_s = 0.0;  // measured host time, never deterministic
};

// Everything except the "volatile" section is a pure function of the run,
// so two identical runs serialize byte-identically once that section is
// stripped.
inline ordered_json build_report(const ReportInputs& in) {
  ordered_json r = ordered_json::object();
  r["schema_version"] = kReportSchemaVersion;
  r["run"] = in.run;
  if (in.machine != nullptr) r["machine"] = machine_json(*in.machine);

  if (!in.setup_transfers.empty()) {
    ordered_json setup = ordered_json::array();
    for (const auto& t : in.setup_transfers) setup.push_back(transfer_json(t));
    r["setup_transfers"] = std::move(setup);
  }

  if (in.outcome != nullptr) {
    const QueryOutcome& o = *in.outcome;
    ordered_json batches = ordered_json::array();
    for (const auto& b : o.batches) {
      ordered_json bj = ordered_json::object();
      bj["batch"] = b.batch_index;
      bj["transfer_s"] = b.transfer_s;
      bj["kernel_s"] = b.kernel_s;
      bj["retrieve_s"] = b.retrieve_s;
      batches.push_back(std::move(bj));
    }
    r["batches"] = std::move(batches);

    ordered_json totals = ordered_json::object();
    totals["transfer_s"] = o.total_transfer_s();
    totals["kernel_s"] = o.total_kernel_s();
    totals["retrieve_s"] = o.total_retrieve_s();
    r["totals"] = std::move(totals);

    ordered_json prof = ordered_json::object();
    prof["bytes_read"] = o.profile.bytes_read;
    prof["bytes_written"] = o.profile.bytes_written;
    prof["total_traffic"] = o.profile.total_traffic();
    prof["mb_read"] = static_cast<double>(o.profile.bytes_read) / kBytesPerMb;
    prof["mb_written"] =
        static_cast<double>(o.profile.bytes_written) / kBytesPerMb;
    prof["nodes_visited"] = o.profile.nodes_visited;
    prof["rects_tested"] = o.profile.rects_tested;
    prof["kernel_s"] = o.profile.kernel_s;
    prof["attained_bandwidth_gb_s"] =
        o.profile.kernel_s > 0.0 ? attained_bandwidth_gb_s(o.profile) : 0.0;
    r["mram_profile"] = std::move(prof);

    r["counts_digest"] = counts_digest(o.counts);
  }

  if (in.energy != nullptr) r["energy"] = energy_json(*in.energy);

  ordered_json vol = ordered_json::object();
  vol["wall_clock_s"] = in.wall_clock_s;
  r["volatile"] = std::move(vol);
  return r;
}

// Normalized form for comparing two runs of the same experiment.
inline std::string strip_volatile(const std::string& report_text) {
  ordered_json r = ordered_json::parse(report_text);
  r.erase("volatile");
  return r.dump(2) + "\n";
}

inline std::string batches_csv(const std::vector<BatchBreakdown>& batches) {
  std::string csv = "batch,transfer_s,kernel_s,retrieve_s\n";
  for (const auto& b : batches) {
    csv += std::to_string(b.batch_index);
    csv += ',';
    csv += detail::double_text(b.transfer_s);
    csv += ',';
    csv += detail::double_text(b.kernel_s);
    csv += ',';
    csv += detail::double_text(b.retrieve_s);
    csv += '\n';
  }
  return csv;
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("write_text_file: cannot open " + path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw io_error("write_text_file: write failed for " + path);
}

inline std::string report_text(const ordered_json& report) {
  return report.dump(2) + "\n";
}

}  // namespace pimrt
