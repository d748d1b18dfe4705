#pragma once

#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace mma {

// Caps worker parallelism for probe and evaluation fan-out. Results are
// written by index, so output order never depends on scheduling. workers <= 1
// runs inline.
struct Executor {
  int workers = 1;

  template <typename Fn>
  void parallel_for(size_t n, Fn&& fn) const {
    if (workers <= 1 || n <= 1) {
      for (size_t i = 0; i < n; ++i) fn(i);
      return;
    }
    const size_t nthreads = std::min<size_t>(static_cast<size_t>(workers), n);
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    std::exception_ptr first_error;
    std::mutex error_mu;
    for (size_t t = 0; t < nthreads; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (size_t i = t; i < n; i += nthreads) fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!first_error) first_error = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
  }
};

}  // namespace mma
