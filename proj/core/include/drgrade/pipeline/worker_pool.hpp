#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <string>
#include <thread>
#include <vector>

namespace drgrade::pipeline {

// Runs task(i) for every i in [0, n) on at most `jobs` threads (0 means 1).
// Items are independent; an exception fails only its own item. Returns one
// message per item, empty on success.
inline std::vector<std::string> run_indexed(std::size_t n, unsigned jobs,
                                            const std::function<void(std::size_t)>& task) {
  std::vector<std::string> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        task(i);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      } catch (...) {
        errors[i] = "unknown error";
      }
    }
  };
  const std::size_t width = std::min<std::size_t>(std::max(1u, jobs), std::max<std::size_t>(n, 1));
  if (width <= 1) {
    worker();
    return errors;
  }
  std::vector<std::jthread> pool;
  pool.reserve(width);
  for (std::size_t t = 0; t < width; ++t) pool.emplace_back(worker);
  pool.clear();
  return errors;
}

}  // namespace drgrade::pipeline
