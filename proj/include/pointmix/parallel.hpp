// pointmix - labeled LiDAR frame mixing and dataset tooling
// SPDX-License-Identifier: Apache-2.0

#ifndef POINTMIX_PARALLEL_HPP
#define POINTMIX_PARALLEL_HPP

#include <algorithm>
#include <cstddef>
#include <exception>
#include <optional>
#include <thread>
#include <vector>

namespace pointmix {

/// Computes produce(i) for i in [0, n) on up to `workers` threads and hands
/// the results to consume() in index order. Work proceeds in chunks so at
/// most `workers * chunk_per_worker` results are alive at once.
template <class Produce, class Consume>
void ordered_parallel_for(std::size_t n, unsigned workers, Produce&& produce, Consume&& consume,
                          std::size_t chunk_per_worker = 4) {
  using T = decltype(produce(std::size_t{0}));
  workers = std::max(1u, workers);
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) consume(produce(i));
    return;
  }
  const std::size_t chunk = static_cast<std::size_t>(workers) * std::max<std::size_t>(1, chunk_per_worker);
  for (std::size_t base = 0; base < n; base += chunk) {
    const std::size_t len = std::min(chunk, n - base);
    std::vector<std::optional<T>> slots(len);
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t k = w; k < len; k += workers) slots[k].emplace(produce(base + k));
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);
    for (auto& s : slots) consume(std::move(*s));
  }
}

}  // namespace pointmix

#endif  // POINTMIX_PARALLEL_HPP
