#pragma once

#include <cstddef>
#include <functional>

namespace guidedco {

/// Worker count: GUIDEDCO_THREADS if set and positive, else the hardware
/// concurrency (at least 1).
int thread_count();

/// Runs f(i) for i in [0, n). Work is handed out in index order; f must only
/// write to slot i of its outputs so the result does not depend on the
/// schedule. The first exception thrown by any f is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& f);

}  // namespace guidedco
