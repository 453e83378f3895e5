#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace uvsdma::sim {

/// Items per work chunk. Fixed so the chunk layout, and therefore the order
/// of every floating-point reduction, never depends on the thread count.
inline constexpr std::int64_t kChunkItems = 8192;

/// Positive worker count: non-positive requests resolve to the hardware
/// concurrency (at least one).
inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hardware = std::thread::hardware_concurrency();
  return hardware > 0 ? static_cast<int>(hardware) : 1;
}

/// Runs work(begin, end) over [0, total) in fixed-size chunks and returns
/// one partial per chunk, indexed by chunk number. Callers fold the partials
/// in chunk order, which makes results identical for every thread count.
/// The first exception thrown by a worker is rethrown after all join.
template <class Partial, class Work>
std::vector<Partial> run_chunked(std::int64_t total, int threads, Work work) {
  const std::int64_t chunks = total <= 0 ? 0 : (total + kChunkItems - 1) / kChunkItems;
  std::vector<Partial> partials(static_cast<std::size_t>(chunks));
  if (chunks == 0) return partials;

  std::atomic<std::int64_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;

  auto body = [&] {
    while (!failed.load(std::memory_order_relaxed)) {
      const std::int64_t chunk = next.fetch_add(1, std::memory_order_relaxed);
      if (chunk >= chunks) return;
      const std::int64_t begin = chunk * kChunkItems;
      const std::int64_t end = std::min(total, begin + kChunkItems);
      try {
        partials[static_cast<std::size_t>(chunk)] = work(begin, end);
      } catch (...) {
        {
          const std::lock_guard<std::mutex> guard(error_mutex);
          if (!error) error = std::current_exception();
        }
        failed.store(true, std::memory_order_relaxed);
        return;
      }
    }
  };

  const int workers =
      static_cast<int>(std::min<std::int64_t>(resolve_threads(threads), chunks));
  if (workers <= 1) {
    body();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int i = 0; i < workers; ++i) pool.emplace_back(body);
    for (auto& worker : pool) worker.join();
  }
  if (error) std::rethrow_exception(error);
  return partials;
}

}  // namespace uvsdma::sim
