#pragma once

#include <cstddef>
#include <functional>

namespace beamlab {

// Worker count: BEAMLAB_THREADS if set and positive, else hardware concurrency.
int worker_count();

// Runs body(i) for i in [0, n). Iterations must not share mutable state.
// The first exception thrown by any worker is rethrown on the caller.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace beamlab
