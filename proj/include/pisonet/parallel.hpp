#pragma once

// Minimal fork-join helper. Worker count comes from PISONET_THREADS when set,
// otherwise the hardware parallelism.

#include <functional>

namespace pisonet {

int worker_count();

/// Runs fn(worker, index) for index in [0, count); worker < worker_count().
/// Index-to-worker assignment is static (index mod workers).
void parallel_for(int count, const std::function<void(int worker, int index)>& fn);

}  // namespace pisonet
