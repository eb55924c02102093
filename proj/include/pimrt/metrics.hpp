#pragma once

#include <cstdint>
#include <string>

#include "pimrt/errors.hpp"

namespace pimrt {

// Byte-count fields are raw bytes. Printed summaries follow the mixed
// convention of the measurement tooling this models: MB = 2^20 bytes for
// traffic volumes, GB = 10^9 bytes for bandwidth.
inline constexpr double kBytesPerMb = 1048576.0;
inline constexpr double kBytesPerGb = 1.0e9;

struct BatchBreakdown {
  std::uint32_t batch_index = 0;
  double transfer_s = 0.0;  // host-to-DPU payloads for this batch
  double kernel_s = 0.0;
  double retrieve_s = 0.0;  // gathering per-query counts back
};

struct MramProfile {
  std::uint64_t bytes_read = 0;
  std::uint64_t bytes_written = 0;
  std::uint64_t nodes_visited = 0;
  std::uint64_t rects_tested = 0;
  double kernel_s = 0.0;

  std::uint64_t total_traffic() const { return bytes_read + bytes_written; }
};

// Aggregate MRAM throughput actually achieved during kernel execution.
inline double attained_bandwidth_gb_s(const MramProfile& p) {
  if (p.kernel_s <= 0.0)
    throw usage_error("attained_bandwidth: kernel time must be positive");
  return static_cast<double>(p.total_traffic()) / p.kernel_s / kBytesPerGb;
}

inline double energy_kj(double runtime_s, double power_w) {
  if (runtime_s < 0.0 || power_w < 0.0)
    throw usage_error("energy_kj: runtime and power must be non-negative");
  return runtime_s * power_w / 1000.0;
}

// How many times more energy the CPU side spends than the DPU side.
inline double efficiency(double cpu_kj, double dpu_kj) {
  if (dpu_kj <= 0.0)
    throw usage_error("efficiency: DPU energy must be positive");
  return cpu_kj / dpu_kj;
}

inline constexpr double kDefaultCpuPowerW = 569.0;
inline constexpr double kDefaultDpuPowerW = 596.0;

struct EnergyReport {
  double cpu_power_w = kDefaultCpuPowerW;
  double dpu_power_w = kDefaultDpuPowerW;
  double cpu_runtime_s = 0.0;
  double dpu_kernel_s = 0.0;
  double cpu_energy_kj = 0.0;
  double dpu_energy_kj = 0.0;
  double efficiency = 0.0;  // meaningful only when both energies are set
};

inline EnergyReport make_energy_report(double cpu_runtime_s, double dpu_kernel_s,
                                       double cpu_power_w = kDefaultCpuPowerW,
                                       double dpu_power_w = kDefaultDpuPowerW) {
  EnergyReport r;
  r.cpu_power_w = cpu_power_w;
  r.dpu_power_w = dpu_power_w;
  r.cpu_runtime_s = cpu_runtime_s;
  r.dpu_kernel_s = dpu_kernel_s;
  r.cpu_energy_kj = energy_kj(cpu_runtime_s, cpu_power_w);
  r.dpu_energy_kj = energy_kj(dpu_kernel_s, dpu_power_w);
  if (r.dpu_energy_kj > 0.0 && r.cpu_energy_kj > 0.0)
    r.efficiency = efficiency(r.cpu_energy_kj, r.dpu_energy_kj);
  return r;
}

}  // namespace pimrt
