// Acceptance gate for the whole project. Each criterion prints exactly one
// PASS/FAIL line on stdout; diagnostics go to stderr; the exit code is the
// number of failed criteria.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "pimrt/pimrt.hpp"

using namespace pimrt;

namespace {

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double s() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  }
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

double rel_err(double got, double want) {
  return std::abs(got - want) / std::abs(want);
}

constexpr Rect kUniverse{0, 0, 10000000, 10000000};

// Shared randomized instance family: dataset, query set, and machine shape
// are a pure function of the instance number.
struct Instance {
  Dataset ds;
  std::vector<Rect> queries;
  std::uint32_t dpus = 1;
  std::uint32_t tasklets = 1;
};

Instance make_instance(int i) {
  static constexpr std::uint32_t p_opts[4] = {1, 3, 16, 64};
  static constexpr std::uint32_t t_opts[3] = {1, 4, 11};
  std::mt19937_64 eng(9000 + static_cast<std::uint64_t>(i));
  const std::uint64_t n = 1 + eng() % 50000;
  const std::uint64_t q = 1 + eng() % 5000;

  Instance in;
  in.dpus = p_opts[i % 4];
  in.tasklets = t_opts[i % 3];
  in.ds = gen_uniform(n, 1000 + i, kUniverse, 0.002);
  if (i % 2 == 0) {
    const double f = std::min(1.0, static_cast<double>(q) / static_cast<double>(n));
    in.queries = sample_queries(in.ds, f, 2000 + i);
  } else {
    in.queries = gen_uniform(q, 3000 + i, kUniverse, 0.02).rects;
  }
  return in;
}

RunSpec machine_spec(const Instance& in, Strategy s) {
  RunSpec spec;
  spec.strategy = s;
  spec.machine.num_dpus = in.dpus;
  spec.machine.tasklets_per_dpu = in.tasklets;
  return spec;
}

// ---- criterion 1: all strategies equal the brute-force oracle ----

bool criterion1(std::string& note) {
  Timer tm;
  static constexpr Strategy kStrategies[4] = {
      Strategy::cpu_seq, Strategy::cpu_par, Strategy::pim_broadcast,
      Strategy::pim_subtree};
  for (int i = 0; i < 20; ++i) {
    const Instance in = make_instance(i);
    const RunResult oracle =
        execute(machine_spec(in, Strategy::brute_force), in.ds, in.queries);
    for (const Strategy s : kStrategies) {
      const RunResult got = execute(machine_spec(in, s), in.ds, in.queries);
      if (got.outcome.counts != oracle.outcome.counts) {
        for (std::size_t q = 0; q < oracle.outcome.counts.size(); ++q) {
          if (got.outcome.counts[q] != oracle.outcome.counts[q]) {
            std::cerr << "criterion 1: instance " << i << " (n="
                      << in.ds.rects.size() << ", q=" << in.queries.size()
                      << ", dpus=" << in.dpus << ", tasklets=" << in.tasklets
                      << ") " << strategy_name(s) << " query " << q
                      << ": got " << got.outcome.counts[q] << ", oracle "
                      << oracle.outcome.counts[q] << "\n";
            break;
          }
        }
        note = std::string(strategy_name(s)) + " diverged from the oracle on instance " +
               std::to_string(i);
        return false;
      }
    }
  }
  const double elapsed = tm.s();
  note = "20 instances x 4 strategies match the oracle in " + fmt(elapsed) + " s";
  if (elapsed >= 120.0) {
    note += " (budget 120 s exceeded)";
    return false;
  }
  return true;
}

// ---- criterion 2: structural invariants of the bulk-loaded tree ----

bool leaves_at_depth(const RTreeNode& n, int depth, int want) {
  if (n.is_leaf) return depth == want;
  for (const auto& c : n.children)
    if (!leaves_at_depth(c, depth + 1, want)) return false;
  return true;
}

std::size_t count_leaves(const RTreeNode& n) {
  if (n.is_leaf) return 1;
  std::size_t total = 0;
  for (const auto& c : n.children) total += count_leaves(c);
  return total;
}

bool mbrs_contained(const RTreeNode& n) {
  if (n.is_leaf) {
    for (const auto& e : n.entries)
      if (!contains(n.mbr, e.rect)) return false;
    return true;
  }
  for (const auto& c : n.children)
    if (!contains(n.mbr, c.mbr) || !mbrs_contained(c)) return false;
  return true;
}

bool criterion2(std::string& note) {
  std::mt19937_64 eng(77001);
  for (int iter = 0; iter < 1000; ++iter) {
    const std::size_t n = 1 + eng() % 3000;
    const std::uint32_t b = 1 + static_cast<std::uint32_t>(eng() % 16);
    const std::uint32_t f = 2 + static_cast<std::uint32_t>(eng() % 15);

    std::vector<Rect> rects;
    rects.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
      const auto x = static_cast<std::int32_t>(eng() % 1000000);
      const auto y = static_cast<std::int32_t>(eng() % 1000000);
      rects.push_back(Rect{x, y, x + static_cast<std::int32_t>(eng() % 5000),
                           y + static_cast<std::int32_t>(eng() % 5000)});
    }

    const RTreeNode root = build_str(rects, b, f);
    const std::size_t want_leaves = (n + b - 1) / b;
    std::string what;
    if (!leaves_at_depth(root, 0, 2)) what = "a leaf is not at level 2";
    else if (count_leaves(root) != want_leaves) what = "leaf count != ceil(N/B)";
    else if (!mbrs_contained(root)) what = "MBR containment violated";
    else {
      const SerializedIndex si = serialize_bfs(root, b, f);
      if (si.leaf_start() != 1 + si.node(0).count())
        what = "leaf_start != 1 + root child count";
    }
    if (!what.empty()) {
      std::cerr << "criterion 2: iteration " << iter << " (n=" << n << ", b="
                << b << ", f=" << f << "): " << what << "\n";
      note = what;
      return false;
    }
  }
  note = "1000 random (N,B,F) builds hold every structural invariant";
  return true;
}

// ---- criterion 3: header screening is conservative ----

bool criterion3(std::string& note) {
  for (int i = 0; i < 20; ++i) {
    const Instance in = make_instance(i);
    RunSpec on = machine_spec(in, Strategy::pim_broadcast);
    RunSpec off = on;
    off.filter_enabled = false;
    const RunResult ron = execute(on, in.ds, in.queries);
    const RunResult roff = execute(off, in.ds, in.queries);
    if (ron.outcome.counts != roff.outcome.counts) {
      note = "filtered counts diverged on instance " + std::to_string(i);
      std::cerr << "criterion 3: " << note << "\n";
      return false;
    }
    if (ron.outcome.profile.nodes_visited > roff.outcome.profile.nodes_visited) {
      note = "filtering visited more nodes than scanning on instance " +
             std::to_string(i);
      std::cerr << "criterion 3: " << note << " ("
                << ron.outcome.profile.nodes_visited << " > "
                << roff.outcome.profile.nodes_visited << ")\n";
      return false;
    }
  }
  note = "screening on/off agrees on all 20 instances and never visits more nodes";
  return true;
}

// ---- criterion 4: communication regimes of the two PIM layouts ----

bool criterion4(std::string& note) {
  Timer tm;
  const Dataset ds = gen_uniform(500000, 4242, kUniverse, 0.001);
  const std::vector<Rect> queries = sample_queries(ds, 0.1, 99);  // 50 000

  RunSpec bs;
  bs.strategy = Strategy::pim_broadcast;
  bs.machine.num_dpus = 256;
  const RunResult br = execute(bs, ds, queries);

  RunSpec st = bs;
  st.strategy = Strategy::pim_subtree;
  const RunResult sr = execute(st, ds, queries);

  const double br_kernel = br.outcome.profile.kernel_s;
  const double br_transfer = br.outcome.total_transfer_s();
  const double sr_kernel = sr.outcome.profile.kernel_s;
  const double sr_transfer = sr.outcome.total_transfer_s();
  std::cerr << "criterion 4: broadcast kernel " << fmt(br_kernel)
            << " s vs transfer " << fmt(br_transfer) << " s; subtree kernel "
            << fmt(sr_kernel) << " s vs transfer " << fmt(sr_transfer)
            << " s over " << sr.outcome.batches.size() << " batches\n";

  if (!(sr_transfer > sr_kernel)) {
    note = "subtree transfer did not dominate its kernel";
    return false;
  }
  if (!(br_kernel > br_transfer)) {
    note = "broadcast kernel did not dominate its transfer";
    return false;
  }

  // Broadcast moves index bytes only at setup; batches carry queries and
  // counts, so per-batch index traffic is a constant zero.
  for (const TransferRecord& t : br.outcome.transfers) {
    if (t.label != "query_batch" && t.label != "results") {
      note = "broadcast moved index bytes inside the batch loop (" + t.label + ")";
      return false;
    }
  }

  // Subtree resends the full set of subtree images before every batch, so
  // cumulative index traffic grows linearly with the batch count.
  std::uint64_t resend_bytes = 0;
  std::size_t resends = 0;
  for (const TransferRecord& t : sr.outcome.transfers) {
    if (t.label == "subtree") {
      ++resends;
      if (resend_bytes == 0) resend_bytes = t.payload_bytes;
      if (t.payload_bytes != resend_bytes) {
        note = "subtree resend size varied across batches";
        return false;
      }
    }
  }
  if (resends != sr.outcome.batches.size() || resend_bytes != sr.index_bytes) {
    note = "subtree index traffic is not one full image per batch";
    return false;
  }

  const double elapsed = tm.s();
  note = "subtree is transfer-bound, broadcast is kernel-bound, index traffic "
         "flat vs linear, in " + fmt(elapsed) + " s";
  return elapsed < 300.0;
}

// ---- criterion 5: strong scaling of the broadcast kernel ----

bool criterion5(std::string& note) {
  Timer tm;
  const Dataset ds = gen_uniform(200000, 515, kUniverse, 0.001);
  const std::vector<Rect> queries = sample_queries(ds, 0.1, 77);  // 20 000

  static constexpr std::uint32_t kDpus[4] = {64, 128, 256, 512};
  double kernel[4] = {};
  for (int i = 0; i < 4; ++i) {
    RunSpec spec;
    spec.strategy = Strategy::pim_broadcast;
    spec.machine.num_dpus = kDpus[i];
    // Screening off keeps total work fixed, so kernel time tracks the
    // largest slice exactly.
    spec.filter_enabled = false;
    const RunResult r = execute(spec, ds, queries);
    kernel[i] = r.outcome.profile.kernel_s;
    std::cerr << "criterion 5: P=" << kDpus[i] << " kernel "
              << fmt(kernel[i]) << " s\n";
  }

  bool ok = true;
  std::string ratios;
  for (int i = 0; i + 1 < 4; ++i) {
    const double r = kernel[i + 1] / kernel[i];
    if (!ratios.empty()) ratios += ", ";
    ratios += fmt(r);
    if (!(r >= 0.45 && r <= 0.65)) ok = false;
  }
  const double elapsed = tm.s();
  note = "doubling ratios " + ratios + " within [0.45, 0.65], in " +
         fmt(elapsed) + " s";
  if (!ok) note = "doubling ratios " + ratios + " left [0.45, 0.65]";
  return ok && elapsed < 300.0;
}

// ---- criterion 6: bandwidth arithmetic on published traffic ----

bool criterion6(std::string& note) {
  MramProfile p;
  p.bytes_read = 547009ull * 1048576;
  p.kernel_s = 23.48;
  const double bw = attained_bandwidth_gb_s(p);
  const double err = rel_err(bw, 24.4);
  note = "547009 MB / 23.48 s -> " + fmt(bw) + " GB/s (" + fmt(err * 100) +
         "% from 24.4)";
  return err <= 0.01;
}

// ---- criterion 7: energy arithmetic across the published table ----

bool criterion7(std::string& note) {
  struct Row {
    const char* name;
    double cpu_s, dpu_s, cpu_kj, dpu_kj, eff;
  };
  static constexpr Row kRows[12] = {
      {"sports-1", 0.41, 0.30, 0.23, 0.18, 1.28},
      {"sports-5", 2.00, 1.50, 1.14, 0.89, 1.28},
      {"sports-10", 3.99, 3.00, 2.27, 1.79, 1.27},
      {"sports-25", 9.95, 7.52, 5.66, 4.48, 1.26},
      {"lakes-1", 12.95, 3.61, 7.37, 2.15, 3.43},
      {"lakes-5", 64.35, 17.57, 36.62, 10.47, 3.50},
      {"lakes-10", 130.12, 35.92, 74.04, 21.41, 3.46},
      {"lakes-25", 319.57, 87.72, 179.36, 51.76, 3.51},
      {"synthetic-1", 23.52, 1.55, 13.38, 0.92, 14.54},
      {"synthetic-5", 117.75, 7.76, 67.00, 4.62, 14.50},
      {"synthetic-10", 236.19, 15.54, 134.39, 9.26, 14.51},
      {"synthetic-25", 594.22, 39.03, 338.11, 23.26, 14.54},
  };

  int bad = 0;
  for (const Row& row : kRows) {
    const double cpu = energy_kj(row.cpu_s, kDefaultCpuPowerW);
    const double dpu = energy_kj(row.dpu_s, kDefaultDpuPowerW);
    const double eff = efficiency(cpu, dpu);
    const double e_cpu = rel_err(cpu, row.cpu_kj);
    const double e_dpu = rel_err(dpu, row.dpu_kj);
    const double e_eff = rel_err(eff, row.eff);
    const bool ok = e_cpu <= 0.01 && e_dpu <= 0.01 && e_eff <= 0.01;
    if (!ok) ++bad;
    std::cerr << "criterion 7: " << row.name << ": cpu " << fmt(cpu)
              << " kJ (want " << fmt(row.cpu_kj) << ", " << fmt(e_cpu * 100)
              << "%), dpu " << fmt(dpu) << " kJ (want " << fmt(row.dpu_kj)
              << ", " << fmt(e_dpu * 100) << "%), eff " << fmt(eff)
              << " (want " << fmt(row.eff) << ", " << fmt(e_eff * 100)
              << "%)" << (ok ? "" : "  <-- outside 1%") << "\n";
  }
  if (bad > 0) {
    note = std::to_string(bad) +
           " of 12 rows deviate by more than 1% under 569 W / 596 W";
    return false;
  }
  note = "all 12 rows reproduced within 1%";
  return true;
}

// ---- criterion 8: capacity enforcement at exact boundaries ----

bool criterion8(std::string& note) {
  // A leaf slice too large for the stock 64 MiB MRAM must be refused at
  // distribution time, before any batch runs.
  {
    const Dataset ds = gen_uniform(2900000, 81, kUniverse, 0.0005);
    const SerializedIndex si = serialize_bfs(build_str(ds.rects, 64, 128), 64, 128);
    MachineConfig cfg;
    cfg.num_dpus = 1;
    PimMachine m(cfg);
    bool threw = false;
    try {
      (void)distribute(si, m);
    } catch (const capacity_error& e) {
      threw = true;
      const std::string what = e.what();
      if (what.find("DPU") == std::string::npos) {
        note = "MRAM error does not name the DPU: " + what;
        return false;
      }
      std::cerr << "criterion 8: MRAM overflow refused: " << what << "\n";
    }
    if (!threw) {
      note = "an oversized leaf slice fit into 64 MiB MRAM";
      return false;
    }
    for (const TransferRecord& t : m.transfers()) {
      if (t.label == "results") {
        note = "results were gathered despite the MRAM overflow";
        return false;
      }
    }
  }

  // The same placement succeeds when MRAM is exactly the needed footprint
  // and fails once the budget is one record short.
  {
    const Dataset ds = gen_uniform(50000, 82, kUniverse, 0.002);
    const SerializedIndex si = serialize_bfs(build_str(ds.rects, 64, 128), 64, 128);
    const std::vector<Rect> queries = sample_queries(ds, 0.002, 5);  // 100
    const std::uint64_t leaves = si.node_count() - si.leaf_start();
    const std::uint64_t header_bytes = 24ull * si.leaf_start();
    const std::uint64_t slice_bytes = leaves * si.node_bytes();
    BroadcastOptions opt;
    opt.batch_capacity = 100;
    const std::uint64_t footprint =
        header_bytes + slice_bytes + 100ull * 16 + 100ull * 4;

    MachineConfig cfg;
    cfg.num_dpus = 1;
    cfg.mram_bytes_per_dpu = footprint;
    PimMachine exact(cfg);
    const BroadcastPlacement pl = distribute(si, exact);
    const QueryOutcome out = run_batches(pl, queries, exact, opt);
    if (out.counts.size() != queries.size()) {
      note = "exact-fit MRAM run did not produce counts";
      return false;
    }

    cfg.mram_bytes_per_dpu = header_bytes + slice_bytes - 8;
    PimMachine tight(cfg);
    bool threw = false;
    try {
      (void)distribute(si, tight);
    } catch (const capacity_error& e) {
      threw = true;
      const std::string what = e.what();
      if (what.find("leaf_slice") == std::string::npos ||
          what.find("DPU") == std::string::npos) {
        note = "slice overflow names neither segment nor DPU: " + what;
        return false;
      }
    }
    if (!threw) {
      note = "a slice eight bytes over budget was accepted";
      return false;
    }

    // WRAM: the kernel's accounted footprint just fits, then misses by one
    // count slot.
    MachineConfig wcfg;
    wcfg.num_dpus = 1;
    const std::uint64_t wram_need =
        header_bytes + 11ull * 256 + 100ull * 4;
    wcfg.wram_bytes_per_dpu = wram_need;
    PimMachine wexact(wcfg);
    const BroadcastPlacement wpl = distribute(si, wexact);
    const QueryOutcome wout = run_batches(wpl, queries, wexact, opt);
    if (wout.counts != out.counts) {
      note = "exact-fit WRAM run changed the counts";
      return false;
    }

    wcfg.wram_bytes_per_dpu = wram_need - 4;
    PimMachine wtight(wcfg);
    const BroadcastPlacement tpl = distribute(si, wtight);
    threw = false;
    try {
      (void)run_batches(tpl, queries, wtight, opt);
    } catch (const capacity_error& e) {
      threw = true;
      const std::string what = e.what();
      if (what.find("count buffer") == std::string::npos) {
        note = "WRAM overflow does not name the failing buffer: " + what;
        return false;
      }
      std::cerr << "criterion 8: WRAM overflow refused: " << what << "\n";
    }
    if (!threw) {
      note = "a WRAM footprint four bytes over budget was accepted";
      return false;
    }
    for (const TransferRecord& t : wtight.transfers()) {
      if (t.label == "results") {
        note = "results were gathered despite the WRAM overflow";
        return false;
      }
    }
  }

  note = "over-budget refused before results, exact-fit budgets succeed";
  return true;
}

// ---- criterion 9: bit-identical repeated runs ----

ordered_json run_report(const RunSpec& spec, const Instance& in,
                        const RunResult& r, double wall_s) {
  ReportInputs rep;
  rep.run["strategy"] = strategy_name(spec.strategy);
  rep.run["rects"] = in.ds.rects.size();
  rep.run["queries"] = in.queries.size();
  rep.run["dpus"] = spec.machine.num_dpus;
  rep.run["tasklets"] = spec.machine.tasklets_per_dpu;
  rep.outcome = &r.outcome;
  rep.setup_transfers = r.setup_transfers;
  EnergyReport energy;
  const bool pim = spec.strategy == Strategy::pim_broadcast ||
                   spec.strategy == Strategy::pim_subtree;
  if (pim) {
    rep.machine = &spec.machine;
    energy = make_energy_report(0.0, r.outcome.profile.kernel_s);
    rep.energy = &energy;
  }
  rep.wall_clock_s = wall_s;
  return build_report(rep);
}

bool criterion9(std::string& note) {
  static constexpr Strategy kStrategies[4] = {
      Strategy::cpu_seq, Strategy::cpu_par, Strategy::pim_broadcast,
      Strategy::pim_subtree};
  const Instance in = make_instance(6);
  for (const Strategy s : kStrategies) {
    const RunSpec spec = machine_spec(in, s);
    const RunResult a = execute(spec, in.ds, in.queries);
    const RunResult b = execute(spec, in.ds, in.queries);
    if (a.outcome.counts != b.outcome.counts) {
      note = std::string(strategy_name(s)) + " counts changed between runs";
      return false;
    }
    if (a.machine_totals.mram_bytes_read != b.machine_totals.mram_bytes_read ||
        a.machine_totals.mram_bytes_written !=
            b.machine_totals.mram_bytes_written ||
        a.machine_totals.nodes_visited != b.machine_totals.nodes_visited ||
        a.machine_totals.rects_tested != b.machine_totals.rects_tested) {
      note = std::string(strategy_name(s)) + " counters changed between runs";
      return false;
    }
    const std::string ra =
        strip_volatile(report_text(run_report(spec, in, a, 1.0)));
    const std::string rb =
        strip_volatile(report_text(run_report(spec, in, b, 2.0)));
    if (ra != rb) {
      note = std::string(strategy_name(s)) + " reports differ after stripping "
             "the volatile section";
      std::cerr << "criterion 9: first report:\n" << ra
                << "second report:\n" << rb;
      return false;
    }
  }
  note = "all four strategies repeat bit-identically (counts, counters, reports)";
  return true;
}

}  // namespace

int main() {
  struct Entry {
    int index;
    bool (*fn)(std::string&);
  };
  static constexpr Entry kEntries[] = {
      {1, criterion1}, {2, criterion2}, {3, criterion3},
      {4, criterion4}, {5, criterion5}, {6, criterion6},
      {7, criterion7}, {8, criterion8}, {9, criterion9},
  };

  int failures = 0;
  for (const Entry& e : kEntries) {
    std::string note;
    bool ok = false;
    try {
      ok = e.fn(note);
    } catch (const std::exception& ex) {
      note = std::string("unexpected exception: ") + ex.what();
    }
    if (!ok) ++failures;
    std::printf("criterion %d: %s - %s\n", e.index, ok ? "PASS" : "FAIL",
                note.c_str());
    std::fflush(stdout);
  }
  return failures;
}
