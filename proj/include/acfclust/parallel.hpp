#pragma once

#include <cstddef>
#include <functional>

namespace acfclust {

// Runs fn(item, worker) for item in [0, n) on `jobs` threads (jobs <= 1 runs
// inline). Items are claimed from a shared counter, so callers must write
// results into per-item slots; the first exception is rethrown after join.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t, int)>& fn);

int hardware_jobs() noexcept;

}  // namespace acfclust
