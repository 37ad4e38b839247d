#include "promptprobe/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace promptprobe {

std::size_t worker_count() {
  if (const char* env = std::getenv("PROMPTPROBE_THREADS")) {
    try {
      const long value = std::stol(env);
      if (value > 0) return static_cast<std::size_t>(value);
    } catch (const std::exception&) {
      // fall through to the hardware default
    }
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, std::size_t workers,
                  const std::function<void(std::size_t, std::size_t)>& body) {
  if (n == 0) return;
  workers = std::clamp<std::size_t>(workers, 1, n);
  if (workers == 1) {
    body(0, n);
    return;
  }
  const std::size_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> failures((n + chunk - 1) / chunk);
  pool.reserve(failures.size());
  for (std::size_t begin = 0, slot = 0; begin < n; begin += chunk, ++slot) {
    const std::size_t end = std::min(n, begin + chunk);
    pool.emplace_back([&body, &failures, begin, end, slot] {
      try {
        body(begin, end);
      } catch (...) {
        failures[slot] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  // Rethrow the failure from the lowest slice so the reported error does not
  // depend on thread timing.
  for (const auto& failure : failures) {
    if (failure) std::rethrow_exception(failure);
  }
}

}  // namespace promptprobe
