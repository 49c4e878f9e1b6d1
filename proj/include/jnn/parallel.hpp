#pragma once

#include <cstdint>
#include <functional>

namespace jnn {

/// Number of worker threads used by tensor ops. Defaults to the JNN_THREADS
/// environment variable or min(hardware_concurrency, 4).
int num_threads();
void set_num_threads(int n);

/// Splits [0, n) into contiguous chunks and runs fn(begin, end) on each.
/// Every output element is computed by exactly one chunk with a fixed
/// per-element operation order, so results are identical for any thread count.
void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn);

}  // namespace jnn
