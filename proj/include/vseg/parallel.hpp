#pragma once

#include <cstddef>
#include <functional>

namespace vseg {

/// Worker count used by every parallel section. Defaults to VSEG_THREADS or 1.
int thread_count();
void set_thread_count(int n);

/// Runs fn(i) for i in [0, n). Each index is processed exactly once; callers
/// write results into per-index slots so output never depends on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

} // namespace vseg
