#pragma once

#include <cstddef>
#include <functional>

namespace saber {

// Runs fn(i) for every i in [0, n) on up to `workers` threads (0 = hardware
// concurrency). Work items must be independent and results must not depend
// on execution order; randomized work must derive its seed from i, never
// from the worker. The first exception thrown by any item is rethrown after
// all workers stop.
void parallel_for(std::size_t n, std::size_t workers,
                  const std::function<void(std::size_t)>& fn);

}  // namespace saber
