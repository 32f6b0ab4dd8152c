#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cstdint>
#include <exception>
#include <mutex>
#include <span>
#include <thread>
#include <vector>

namespace cmeta {

double normal_cdf(double x);

/// Inverse of the standard normal CDF, accurate to a few ulps on (0, 1).
double normal_quantile(double p);

/// Two-sided critical value: z such that P(|Z| <= z) = level.
double z_for_level(double level);

double mean(std::span<const double> xs);
/// Unbiased (n - 1) sample variance; 0 for fewer than two values.
double sample_variance(std::span<const double> xs);
double sample_sd(std::span<const double> xs);
double median(std::vector<double> xs);

/// Independent seed for stream `stream` of a base seed (SplitMix64 finalizer).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

/// Runs body(i) for i in [0, n) on a fixed worker pool. Each index is handled
/// exactly once, so results written to slot i are schedule-independent.
template <typename Body>
void parallel_for(std::size_t n, Body&& body, unsigned max_threads = 0) {
  unsigned workers = max_threads ? max_threads : std::thread::hardware_concurrency();
  if (workers == 0) workers = 1;
  if (n < 2 || workers == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, n));
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < n; i += workers) {
          try {
            body(i);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            return;
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace cmeta
