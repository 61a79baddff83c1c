#pragma once

#include <cstddef>
#include <functional>

namespace hsclab {

/// Worker count: HSCLAB_THREADS if set to a positive integer, otherwise the
/// hardware concurrency (at least 1).
int worker_count();

/// Calls body(i) for i in [0, count) on up to worker_count() threads. Each
/// index is visited exactly once; the first exception thrown is rethrown.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace hsclab
