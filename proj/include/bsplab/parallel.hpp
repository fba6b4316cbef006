#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace bsplab {

/// SplitMix64 finalizer; used to derive independent per-path seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed of stream `index` under `master`: splitmix64(master ^ splitmix64(index)).
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
  return splitmix64(master ^ splitmix64(index));
}

inline unsigned default_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

/// Runs fn(i) for i in [0, count) on up to `threads` workers in contiguous
/// chunks. Callers write into per-index slots, so the reduction they do
/// afterwards is order-independent of scheduling.
template <class Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> workers;
    workers.reserve(threads);
    const std::size_t chunk = (count + threads - 1) / threads;
    for (unsigned w = 0; w < threads; ++w) {
      const std::size_t begin = w * chunk;
      const std::size_t end = std::min(count, begin + chunk);
      if (begin >= end) break;
      workers.emplace_back([&, begin, end] {
        try {
          for (std::size_t i = begin; i < end; ++i) fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace bsplab
