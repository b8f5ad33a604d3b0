#pragma once

#include <cstddef>
#include <exception>
#include <functional>

namespace oclb {

/// Worker count used by scene-parallel loops; 0 means available parallelism.
void set_thread_count(std::size_t threads);
std::size_t thread_count();

/// Runs fn(i) for i in [0, n) over contiguous chunks. Results must be written
/// to per-index slots so output order does not depend on scheduling. The first
/// exception thrown by any worker is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace oclb
