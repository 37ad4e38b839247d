#pragma once

#include <cstddef>
#include <functional>

namespace promptprobe {

// Worker count: PROMPTPROBE_THREADS if set to a positive integer, otherwise
// the hardware concurrency (at least 1).
std::size_t worker_count();

// Runs body(begin, end) over contiguous slices of [0, n). Slices are fixed by
// n and the worker count, so per-slice results combined in slice order give
// the same answer on every run with the same thread cap.
void parallel_for(std::size_t n, std::size_t workers,
                  const std::function<void(std::size_t, std::size_t)>& body);

inline void parallel_for(std::size_t n,
                         const std::function<void(std::size_t, std::size_t)>& body) {
  parallel_for(n, worker_count(), body);
}

}  // namespace promptprobe
