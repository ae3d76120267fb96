#pragma once

#include <cstddef>
#include <functional>

namespace cocyclelab {

// Worker count: COCYCLELAB_THREADS if set and positive, else hardware concurrency.
int thread_count();

// Runs body(i) for i in [0, n); each index is handled exactly once, results are
// written by the body into per-index slots so the merge order is the index order.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace cocyclelab
