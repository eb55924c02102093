#pragma once

#include <cstdint>
#include <vector>

#include "pimrt/metrics.hpp"
#include "pimrt/pim_machine.hpp"

namespace pimrt {

// Everything a strategy run produces: exact per-query totals plus the
// modeled cost picture. Transfers here cover the batch loop only; one-time
// distribution traffic lives on the placement that was queried.
struct QueryOutcome {
  std::vector<std::uint64_t> counts;
  std::vector<BatchBreakdown> batches;
  std::vector<TransferRecord> transfers;
  MramProfile profile;

  double total_transfer_s() const {
    double s = 0.0;
    for (const auto& b : batches) s += b.transfer_s;
    return s;
  }
  double total_kernel_s() const {
    double s = 0.0;
    for (const auto& b : batches) s += b.kernel_s;
    return s;
  }
  double total_retrieve_s() const {
    double s = 0.0;
    for (const auto& b : batches) s += b.retrieve_s;
    return s;
  }
};

}  // namespace pimrt
