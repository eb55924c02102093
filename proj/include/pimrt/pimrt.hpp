#pragma once

// Umbrella header: the whole library in one include.

#include "pimrt/broadcast_strategy.hpp"
#include "pimrt/bytes.hpp"
#include "pimrt/cpu_engine.hpp"
#include "pimrt/errors.hpp"
#include "pimrt/geometry.hpp"
#include "pimrt/metrics.hpp"
#include "pimrt/outcome.hpp"
#include "pimrt/pim_machine.hpp"
#include "pimrt/report.hpp"
#include "pimrt/rtree_build.hpp"
#include "pimrt/runner.hpp"
#include "pimrt/serialize.hpp"
#include "pimrt/strategy_util.hpp"
#include "pimrt/subtree_strategy.hpp"
#include "pimrt/workload.hpp"
