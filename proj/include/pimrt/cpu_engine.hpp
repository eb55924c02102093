#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <span>
#include <thread>
#include <vector>

#include "pimrt/rtree_build.hpp"

namespace pimrt {

struct QueryBatchResult {
  std::vector<std::uint64_t> counts;  // one entry per query, in input order
  double elapsed_s = 0.0;             // wall clock, varies run to run
  std::uint32_t threads_used = 1;
  std::uint32_t chunk_size = 0;
};

// Counts dataset rects overlapping q. Subtrees whose MBR misses q are
// never descended.
inline std::uint64_t search_rtree(const RTreeNode& node, const Rect& q) {
  if (!overlaps(node.mbr, q)) return 0;
  std::uint64_t count = 0;
  if (node.is_leaf) {
    for (const auto& e : node.entries)
      if (overlaps(e.rect, q)) ++count;
  } else {
    for (const auto& c : node.children) count += search_rtree(c, q);
  }
  return count;
}

inline QueryBatchResult run_sequential(const RTreeNode& root,
                                       std::span<const Rect> queries) {
  QueryBatchResult r;
  r.counts.resize(queries.size());
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < queries.size(); ++i)
    r.counts[i] = search_rtree(root, queries[i]);
  r.elapsed_s = std::chrono::duration<double>(
                    std::chrono::steady_clock::now() - t0).count();
  return r;
}

// Dynamic scheduling: workers claim fixed-size chunks of the query array
// through one shared atomic cursor until it runs past the end. Chunk
// boundaries never affect the counts, only load balance.
inline QueryBatchResult run_parallel(const RTreeNode& root,
                                     std::span<const Rect> queries,
                                     std::uint32_t num_threads,
                                     std::uint32_t chunk_size) {
  if (num_threads < 1) throw usage_error("run_parallel: num_threads must be >= 1");
  if (chunk_size < 1) throw usage_error("run_parallel: chunk_size must be >= 1");

  QueryBatchResult r;
  r.counts.resize(queries.size());
  r.threads_used = num_threads;
  r.chunk_size = chunk_size;

  std::atomic<std::size_t> next{0};
  const auto t0 = std::chrono::steady_clock::now();
  auto worker = [&] {
    for (;;) {
      const std::size_t start = next.fetch_add(chunk_size);
      if (start >= queries.size()) return;
      const std::size_t end = std::min<std::size_t>(start + chunk_size,
                                                    queries.size());
      for (std::size_t i = start; i < end; ++i)
        r.counts[i] = search_rtree(root, queries[i]);
    }
  };
  {
    std::vector<std::jthread> pool;
    pool.reserve(num_threads);
    for (std::uint32_t t = 0; t < num_threads; ++t) pool.emplace_back(worker);
  }
  r.elapsed_s = std::chrono::duration<double>(
                    std::chrono::steady_clock::now() - t0).count();
  return r;
}

// Reference answer: test every rect against every query.
inline std::vector<std::uint64_t> brute_force(std::span<const Rect> rects,
                                              std::span<const Rect> queries) {
  std::vector<std::uint64_t> counts(queries.size(), 0);
  for (std::size_t qi = 0; qi < queries.size(); ++qi) {
    const Rect q = queries[qi];
    std::uint64_t c = 0;
    for (const Rect& r : rects)
      if (overlaps(r, q)) ++c;
    counts[qi] = c;
  }
  return counts;
}

}  // namespace pimrt
