// Command-line front end: dataset generation, index building, strategy
// runs, scaling sweeps, and oracle verification.

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pimrt/pimrt.hpp"

namespace {

using namespace pimrt;

// Binary caches announce themselves with a magic prefix; anything else is
// parsed as CSV and scaled.
Dataset load_dataset(const std::string& path, int scale_digits) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw io_error("cannot open dataset " + path);
  char magic[4] = {};
  probe.read(magic, 4);
  const bool binary =
      probe.gcount() == 4 && std::memcmp(magic, kDatasetMagic, 4) == 0;
  probe.close();
  if (binary) return load_rects_binary(path);
  ScaleSpec spec;
  spec.decimal_digits = scale_digits;
  return load_rects(path, spec);
}

Rect parse_universe(const std::string& text) {
  std::int64_t vals[4];
  const char* p = text.data();
  const char* end = text.data() + text.size();
  for (int i = 0; i < 4; ++i) {
    const auto [next, ec] = std::from_chars(p, end, vals[i]);
    if (ec != std::errc() || (i < 3 && (next >= end || *next != ',')))
      throw usage_error("--universe expects xmin,ymin,xmax,ymax integers, got '" +
                        text + "'");
    p = next + (i < 3 ? 1 : 0);
  }
  if (p != end)
    throw usage_error("--universe has trailing characters: '" + text + "'");
  for (const std::int64_t v : vals)
    if (v < INT32_MIN || v > INT32_MAX)
      throw usage_error("--universe coordinate out of 32-bit range: " +
                        std::to_string(v));
  return Rect{static_cast<std::int32_t>(vals[0]),
              static_cast<std::int32_t>(vals[1]),
              static_cast<std::int32_t>(vals[2]),
              static_cast<std::int32_t>(vals[3])};
}

struct MachineFlags {
  std::string config_path;
  std::uint32_t dpus = 0;
  std::uint32_t tasklets = 0;
  bool dpus_set = false;
  bool tasklets_set = false;
};

void add_machine_flags(CLI::App* cmd, MachineFlags& mf) {
  cmd->add_option("--config", mf.config_path,
                  "machine config file (fallback: $PIM_RTREE_CONFIG)");
  cmd->add_option("--dpus", mf.dpus, "number of DPUs")
      ->each([&mf](const std::string&) { mf.dpus_set = true; });
  cmd->add_option("--tasklets", mf.tasklets, "tasklets per DPU")
      ->each([&mf](const std::string&) { mf.tasklets_set = true; });
}

MachineConfig resolve_machine(const MachineFlags& mf, std::uint32_t desk_scale) {
  MachineConfig cfg;
  std::string path = mf.config_path;
  if (path.empty())
    if (const char* env = std::getenv("PIM_RTREE_CONFIG"); env && *env)
      path = env;
  if (!path.empty()) cfg = load_machine_config(path);
  if (mf.dpus_set) cfg.num_dpus = mf.dpus;
  if (mf.tasklets_set) cfg.tasklets_per_dpu = mf.tasklets;
  cfg.validate();  // flag values must stand on their own before scaling
  if (desk_scale > 1) cfg.num_dpus = std::max(1u, cfg.num_dpus / desk_scale);
  return cfg;
}

// Shared run/sweep/verify inputs.
struct RunArgs {
  std::string strategy = "pim-broadcast";
  std::string data_path;
  int scale_digits = 6;
  double fraction = 0.01;
  std::uint64_t query_seed = 7;
  std::uint32_t batch = 10000;
  std::uint32_t bundle_factor = 64;
  std::uint32_t fanout = 128;
  bool no_filter = false;
  bool no_prune = false;
  bool no_retransmit = false;
  std::uint32_t threads = 8;
  std::uint32_t chunk = 64;
  std::uint32_t desk_scale = 1;
  double cpu_power_w = kDefaultCpuPowerW;
  double dpu_power_w = kDefaultDpuPowerW;
  double cpu_seconds = 0.0;  // reference CPU time for the energy ratio
  MachineFlags machine;
};

void add_run_flags(CLI::App* cmd, RunArgs& a, bool with_strategy = true) {
  if (with_strategy)
    cmd->add_option("--strategy", a.strategy,
                    "cpu-seq | cpu-par | pim-broadcast | pim-subtree | brute-force");
  cmd->add_option("--data", a.data_path, "dataset file (binary cache or CSV)")
      ->required();
  cmd->add_option("--scale-digits", a.scale_digits,
                  "decimal digits kept when scaling CSV coordinates");
  cmd->add_option("--fraction", a.fraction,
                  "query count as a fraction of the dataset");
  cmd->add_option("--query-seed", a.query_seed, "query sampling seed");
  cmd->add_option("--batch", a.batch, "queries per batch");
  cmd->add_option("--bundle-factor", a.bundle_factor, "rects per leaf");
  cmd->add_option("--fanout", a.fanout, "children per internal node");
  cmd->add_flag("--no-filter", a.no_filter, "disable the header screen");
  cmd->add_flag("--no-prune", a.no_prune, "disable subtree MBR pruning");
  cmd->add_flag("--no-retransmit", a.no_retransmit,
                "send subtrees once instead of per batch");
  cmd->add_option("--threads", a.threads, "cpu-par worker threads");
  cmd->add_option("--chunk", a.chunk, "cpu-par queries per claimed chunk");
  cmd->add_option("--desk-scale", a.desk_scale,
                  "divide DPU count and dataset size by this factor");
  cmd->add_option("--cpu-power", a.cpu_power_w, "CPU package watts");
  cmd->add_option("--dpu-power", a.dpu_power_w, "DPU system watts");
  cmd->add_option("--cpu-seconds", a.cpu_seconds,
                  "reference CPU runtime for the energy ratio");
  add_machine_flags(cmd, a.machine);
}

struct PreparedRun {
  Dataset ds;
  std::vector<Rect> queries;
  RunSpec spec;
};

PreparedRun prepare(const RunArgs& a) {
  if (a.desk_scale < 1) throw usage_error("--desk-scale must be >= 1");
  PreparedRun p;
  p.ds = load_dataset(a.data_path, a.scale_digits);
  if (a.desk_scale > 1) {
    const std::size_t keep =
        std::max<std::size_t>(1, p.ds.rects.size() / a.desk_scale);
    p.ds.rects.resize(keep);
  }
  p.queries = sample_queries(p.ds, a.fraction, a.query_seed);
  p.spec.strategy = parse_strategy(a.strategy);
  p.spec.bundle_factor = a.bundle_factor;
  p.spec.fanout = a.fanout;
  p.spec.batch_capacity = a.batch;
  p.spec.filter_enabled = !a.no_filter;
  p.spec.prune_enabled = !a.no_prune;
  p.spec.retransmit_per_batch = !a.no_retransmit;
  p.spec.cpu_threads = a.threads;
  p.spec.cpu_chunk = a.chunk;
  p.spec.machine = resolve_machine(a.machine, a.desk_scale);
  return p;
}

bool is_pim(Strategy s) {
  return s == Strategy::pim_broadcast || s == Strategy::pim_subtree;
}

ordered_json run_block(const RunArgs& a, const PreparedRun& p,
                       const RunResult& res) {
  ordered_json run = ordered_json::object();
  run["strategy"] = strategy_name(p.spec.strategy);
  run["dataset"] = p.ds.source;
  run["n_rects"] = p.ds.rects.size();
  run["n_queries"] = p.queries.size();
  run["query_fraction"] = a.fraction;
  run["query_seed"] = a.query_seed;
  run["batch_capacity"] = p.spec.batch_capacity;
  run["bundle_factor"] = p.spec.bundle_factor;
  run["fanout"] = p.spec.fanout;
  run["filter_enabled"] = p.spec.filter_enabled;
  run["prune_enabled"] = p.spec.prune_enabled;
  run["retransmit_per_batch"] = p.spec.retransmit_per_batch;
  run["cpu_threads"] = p.spec.cpu_threads;
  run["cpu_chunk"] = p.spec.cpu_chunk;
  run["desk_scale"] = a.desk_scale;
  run["index_bytes"] = res.index_bytes;
  return run;
}

EnergyReport run_energy(const RunArgs& a, const PreparedRun& p,
                        const RunResult& res) {
  double cpu_s = a.cpu_seconds;
  if (cpu_s == 0.0 && !is_pim(p.spec.strategy)) cpu_s = res.cpu_elapsed_s;
  return make_energy_report(cpu_s, res.outcome.profile.kernel_s,
                            a.cpu_power_w, a.dpu_power_w);
}

double setup_seconds(const RunResult& res) {
  double s = 0.0;
  for (const auto& t : res.setup_transfers) s += t.modeled_time_s;
  return s;
}

void print_summary(const PreparedRun& p, const RunResult& res,
                   const EnergyReport& energy) {
  const QueryOutcome& o = res.outcome;
  std::printf("strategy        %s\n", strategy_name(p.spec.strategy));
  std::printf("rects           %zu\n", p.ds.rects.size());
  std::printf("queries         %zu\n", p.queries.size());
  if (is_pim(p.spec.strategy)) {
    std::printf("dpus            %u\n", p.spec.machine.num_dpus);
    std::printf("tasklets        %u\n", p.spec.machine.tasklets_per_dpu);
    std::printf("batches         %zu\n", o.batches.size());
    std::printf("index bytes     %llu\n",
                static_cast<unsigned long long>(res.index_bytes));
    std::printf("setup_s         %.6f\n", setup_seconds(res));
    std::printf("transfer_s      %.6f\n", o.total_transfer_s());
    std::printf("kernel_s        %.6f\n", o.total_kernel_s());
    std::printf("retrieve_s      %.6f\n", o.total_retrieve_s());
    std::printf("end_to_end_s    %.6f\n",
                setup_seconds(res) + o.total_transfer_s() +
                    o.total_kernel_s() + o.total_retrieve_s());
    std::printf("energy_kj       %.4f (dpu kernel @ %.0f W)\n",
                energy.dpu_energy_kj, energy.dpu_power_w);
    if (energy.efficiency > 0.0)
      std::printf("efficiency      %.2f (cpu kJ / dpu kJ)\n", energy.efficiency);
  } else {
    std::printf("elapsed_s       %.6f\n", res.cpu_elapsed_s);
    std::printf("energy_kj       %.4f (cpu @ %.0f W)\n", energy.cpu_energy_kj,
                energy.cpu_power_w);
  }
}

int cmd_run(const RunArgs& a, const std::string& out_path,
            const std::string& csv_path) {
  const auto t0 = std::chrono::steady_clock::now();
  PreparedRun p = prepare(a);
  const RunResult res = execute(p.spec, p.ds, p.queries);
  const EnergyReport energy = run_energy(a, p, res);
  print_summary(p, res, energy);

  if (!out_path.empty()) {
    ReportInputs in;
    in.run = run_block(a, p, res);
    in.outcome = &res.outcome;
    in.setup_transfers = res.setup_transfers;
    if (is_pim(p.spec.strategy)) in.machine = &p.spec.machine;
    in.energy = &energy;
    in.wall_clock_s = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - t0).count();
    write_text_file(out_path, report_text(build_report(in)));
    std::printf("report          %s\n", out_path.c_str());
  }
  if (!csv_path.empty()) {
    write_text_file(csv_path, batches_csv(res.outcome.batches));
    std::printf("csv             %s\n", csv_path.c_str());
  }
  return 0;
}

int cmd_verify(const RunArgs& a) {
  PreparedRun p = prepare(a);
  const RunResult res = execute(p.spec, p.ds, p.queries);
  const std::vector<std::uint64_t> expect = brute_force(p.ds.rects, p.queries);
  for (std::size_t i = 0; i < expect.size(); ++i) {
    if (res.outcome.counts[i] != expect[i]) {
      std::printf("verify: FAIL at query %zu: %s returned %llu, brute force %llu\n",
                  i, strategy_name(p.spec.strategy),
                  static_cast<unsigned long long>(res.outcome.counts[i]),
                  static_cast<unsigned long long>(expect[i]));
      return 1;
    }
  }
  std::printf("verify: PASS (%zu queries, strategy %s)\n", expect.size(),
              strategy_name(p.spec.strategy));
  return 0;
}

int cmd_sweep(RunArgs a, const std::vector<std::uint32_t>& dpu_list,
              const std::vector<std::uint32_t>& tasklet_list,
              const std::string& out_dir) {
  if (dpu_list.empty())
    throw usage_error("sweep: --dpus list must not be empty");
  const std::vector<std::uint32_t> tasklets =
      tasklet_list.empty() ? std::vector<std::uint32_t>{0} : tasklet_list;

  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);
  std::printf("%8s %9s %12s %12s %12s %14s\n", "dpus", "tasklets", "transfer_s",
              "kernel_s", "retrieve_s", "end_to_end_s");
  for (const std::uint32_t d : dpu_list) {
    for (const std::uint32_t t : tasklets) {
      a.machine.dpus = d;
      a.machine.dpus_set = true;
      if (t != 0) {
        a.machine.tasklets = t;
        a.machine.tasklets_set = true;
      }
      const auto t0 = std::chrono::steady_clock::now();
      PreparedRun p = prepare(a);
      const RunResult res = execute(p.spec, p.ds, p.queries);
      const QueryOutcome& o = res.outcome;
      const double end_to_end = setup_seconds(res) + o.total_transfer_s() +
                                o.total_kernel_s() + o.total_retrieve_s();
      std::printf("%8u %9u %12.6f %12.6f %12.6f %14.6f\n", d,
                  p.spec.machine.tasklets_per_dpu, o.total_transfer_s(),
                  o.total_kernel_s(), o.total_retrieve_s(), end_to_end);
      if (!out_dir.empty()) {
        ReportInputs in;
        in.run = run_block(a, p, res);
        in.outcome = &res.outcome;
        in.setup_transfers = res.setup_transfers;
        if (is_pim(p.spec.strategy)) in.machine = &p.spec.machine;
        const EnergyReport energy = run_energy(a, p, res);
        in.energy = &energy;
        in.wall_clock_s = std::chrono::duration<double>(
                              std::chrono::steady_clock::now() - t0).count();
        const std::string path =
            out_dir + "/sweep_p" + std::to_string(p.spec.machine.num_dpus) +
            "_t" + std::to_string(p.spec.machine.tasklets_per_dpu) + ".json";
        write_text_file(path, report_text(build_report(in)));
      }
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"R-tree range queries on a simulated processing-in-memory system"};
  app.require_subcommand(1);
  int rc = 0;

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  struct {
    std::uint64_t count = 100000;
    std::uint64_t seed = 1;
    std::string universe = "0,0,1000000000,1000000000";
    double max_extent = 0.01;
    std::string out;
  } g;
  gen->add_option("--count", g.count, "number of rectangles");
  gen->add_option("--seed", g.seed, "generator seed");
  gen->add_option("--universe", g.universe, "xmin,ymin,xmax,ymax bounds");
  gen->add_option("--max-extent", g.max_extent,
                  "max rect extent as a fraction of the universe");
  gen->add_option("--out", g.out, "output dataset file")->required();
  gen->callback([&] {
    const Dataset ds =
        gen_uniform(g.count, g.seed, parse_universe(g.universe), g.max_extent);
    save_rects(ds, g.out);
    std::printf("gen-data: wrote %zu rects to %s\n", ds.rects.size(),
                g.out.c_str());
  });

  // build-index
  auto* build = app.add_subcommand("build-index", "bulk-load and serialize an index");
  struct {
    std::string input;
    int scale_digits = 6;
    std::uint32_t bundle_factor = 64;
    std::uint32_t fanout = 128;
    std::string mode = "str";
    std::uint32_t dpus = 2540;
    std::string out;
  } b;
  build->add_option("--input", b.input, "dataset file")->required();
  build->add_option("--scale-digits", b.scale_digits,
                    "decimal digits kept when scaling CSV coordinates");
  build->add_option("--bundle-factor", b.bundle_factor, "rects per leaf");
  build->add_option("--fanout", b.fanout, "children per internal node (str)");
  build->add_option("--mode", b.mode, "str | subtree")
      ->check(CLI::IsMember({"str", "subtree"}));
  build->add_option("--dpus", b.dpus, "target DPU count (subtree mode)");
  build->add_option("--out", b.out, "output index file")->required();
  build->callback([&] {
    const Dataset ds = load_dataset(b.input, b.scale_digits);
    SerializedIndex si = [&] {
      if (b.mode == "str") {
        const RTreeNode root = build_str(ds.rects, b.bundle_factor, b.fanout);
        return serialize_bfs(root, b.bundle_factor, b.fanout);
      }
      const RTreeNode root =
          build_fanout_constrained(ds.rects, b.dpus, b.bundle_factor);
      const std::uint32_t f =
          std::max<std::uint32_t>(1, detail::max_internal_fanout(root));
      return serialize_bfs(root, b.bundle_factor, f);
    }();
    save_index(si, b.out);
    std::printf("build-index: %u nodes (%zu bytes each) to %s\n",
                si.node_count(), si.node_bytes(), b.out.c_str());
  });

  // run
  auto* run = app.add_subcommand("run", "execute one strategy end to end");
  RunArgs ra;
  std::string run_out, run_csv;
  add_run_flags(run, ra);
  run->add_option("--out", run_out, "JSON report path");
  run->add_option("--csv", run_csv, "per-batch CSV path");
  run->callback([&] { rc = cmd_run(ra, run_out, run_csv); });

  // sweep
  auto* sweep = app.add_subcommand("sweep", "repeat a run over DPU/tasklet lists");
  RunArgs sa;
  std::vector<std::uint32_t> sweep_dpus, sweep_tasklets;
  std::string sweep_dir;
  add_run_flags(sweep, sa);
  sweep->add_option("--sweep-dpus", sweep_dpus, "comma-separated DPU counts")
      ->delimiter(',')
      ->required();
  sweep->add_option("--sweep-tasklets", sweep_tasklets,
                    "comma-separated tasklet counts")
      ->delimiter(',');
  sweep->add_option("--out-dir", sweep_dir, "directory for per-point reports");
  sweep->callback([&] { rc = cmd_sweep(sa, sweep_dpus, sweep_tasklets, sweep_dir); });

  // verify
  auto* verify = app.add_subcommand("verify", "check a strategy against brute force");
  RunArgs va;
  add_run_flags(verify, va);
  verify->callback([&] { rc = cmd_verify(va); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return rc;
}
