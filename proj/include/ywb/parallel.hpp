#pragma once

#include <cstddef>
#include <functional>

namespace ywb {

// Number of workers used by parallel_for: the YWB_WORKERS environment
// variable if set (>= 1), otherwise std::thread::hardware_concurrency().
int worker_count();

// Runs body(i) for i in [0, n).  Work items must be independent; any shared
// output must be written to per-index slots so that results do not depend on
// scheduling.  Exceptions from workers are rethrown on the calling thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace ywb
