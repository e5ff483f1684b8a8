#pragma once

#include <cstddef>
#include <functional>

namespace mgst {

/// Worker count: hardware concurrency, capped by the MGST_THREADS
/// environment variable when it holds a positive integer.
int worker_count();

/// Calls fn(i) for i in [0, n) on up to `workers` threads (0 = worker_count()).
/// Indices are claimed dynamically; the first exception thrown by any call
/// is rethrown after all workers have joined.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, int workers = 0);

}  // namespace mgst
