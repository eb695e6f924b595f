#pragma once

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <unistd.h>

namespace sdss::cli {

/// Single-line progress counter on stderr; silent when stderr is not a terminal.
class Progress {
 public:
  Progress(std::string label, std::size_t total, bool quiet)
      : label_(std::move(label)), total_(total), enabled_(!quiet && isatty(STDERR_FILENO) == 1) {}

  void tick() {
    const std::size_t done = ++done_;
    if (!enabled_) return;
    if (done != total_ && done % 16 != 0) return;
    std::lock_guard lock(mu_);
    std::fprintf(stderr, "\r[%s] %zu/%zu", label_.c_str(), done, total_);
    if (done == total_) std::fputc('\n', stderr);
    std::fflush(stderr);
  }

 private:
  std::string label_;
  std::size_t total_;
  bool enabled_;
  std::atomic<std::size_t> done_{0};
  std::mutex mu_;
};

/// Runs fn(i) for i in [0, n) on `jobs` threads. Callers write results into
/// slot i, so output order never depends on the schedule. The first
/// exception escaping fn is rethrown after all workers join.
template <class Fn>
void parallel_for(std::size_t n, unsigned jobs, Fn&& fn, Progress* progress = nullptr) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
      if (progress != nullptr) progress->tick();
    }
  };
  const unsigned threads = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, jobs), std::max<std::size_t>(n, 1)));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace sdss::cli
