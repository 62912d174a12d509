#include "pisonet/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace pisonet {

int worker_count() {
  if (const char* env = std::getenv("PISONET_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(int count, const std::function<void(int, int)>& fn) {
  const int W = std::min(worker_count(), count);
  if (W <= 1) {
    for (int i = 0; i < count; ++i) fn(0, i);
    return;
  }
  std::exception_ptr err;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (int w = 0; w < W; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int i = w; i < count; i += W) fn(w, i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!err) err = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace pisonet
