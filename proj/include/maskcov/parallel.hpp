#pragma once

#include "maskcov/common.hpp"

#include <algorithm>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace maskcov {

/// Runs body(i) for i in [0, count) on up to `jobs` threads with static
/// striping. The first captured exception is rethrown after all workers join.
inline void parallel_for(Index count, int jobs, const std::function<void(Index)>& body) {
  const int workers = static_cast<int>(std::max<Index>(1, std::min<Index>(jobs, count)));
  if (workers <= 1) {
    for (Index i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (Index i = w; i < count; i += workers) body(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace maskcov
