#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "emf/rng.hpp"

namespace emf {

namespace detail {
inline unsigned& worker_setting() {
  static unsigned workers = [] {
    if (const char* env = std::getenv("EMF_THREADS")) {
      const long v = std::strtol(env, nullptr, 10);
      if (v > 0) return static_cast<unsigned>(v);
    }
    return 1u;
  }();
  return workers;
}
}  // namespace detail

inline unsigned worker_count() { return detail::worker_setting(); }
inline void set_worker_count(unsigned n) { detail::worker_setting() = std::max(1u, n); }

/// Per-replica seed, independent of how replicas are scheduled.
inline std::uint64_t replica_seed(std::uint64_t base_seed, std::uint64_t replica_id) {
  return rng::derive(base_seed, {static_cast<std::uint64_t>(rng::Domain::replica), replica_id});
}

/// Evaluates f(0..count-1) into a vector. Results are written by index, so the
/// output is identical for any worker count.
template <class T, class F>
std::vector<T> replica_map(std::size_t count, F&& f, unsigned workers = worker_count()) {
  std::vector<T> out(count);
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) out[i] = f(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  constexpr std::size_t chunk = 64;
  auto work = [&] {
    try {
      for (;;) {
        const std::size_t begin = next.fetch_add(chunk);
        if (begin >= count) return;
        const std::size_t end = std::min(count, begin + chunk);
        for (std::size_t i = begin; i < end; ++i) out[i] = f(i);
      }
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next = count;
    }
  };
  std::vector<std::jthread> pool;
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  pool.clear();
  if (failure) std::rethrow_exception(failure);
  return out;
}

/// Pairwise (cascade) summation.
inline double pairwise_sum(std::span<const double> x) {
  if (x.size() <= 16) {
    double s = 0.0;
    for (double v : x) s += v;
    return s;
  }
  const std::size_t half = x.size() / 2;
  return pairwise_sum(x.first(half)) + pairwise_sum(x.subspan(half));
}

struct SampleSummary {
  double mean = 0.0;
  double stderr_ = 0.0;
  double stddev = 0.0;
  std::size_t count = 0;
};

inline SampleSummary summarize(std::span<const double> x) {
  SampleSummary s;
  s.count = x.size();
  if (x.empty()) return s;
  s.mean = pairwise_sum(x) / static_cast<double>(x.size());
  if (x.size() > 1) {
    std::vector<double> dev(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) dev[i] = (x[i] - s.mean) * (x[i] - s.mean);
    s.stddev = std::sqrt(pairwise_sum(dev) / static_cast<double>(x.size() - 1));
    s.stderr_ = s.stddev / std::sqrt(static_cast<double>(x.size()));
  }
  return s;
}

}  // namespace emf
