#pragma once

#include <cstddef>
#include <functional>

namespace npd::par {

// Thread cap for intra-phase fan-out: min(hardware_concurrency, NPD_THREADS).
size_t thread_count();

// Runs fn(i) for i in [0, n). Work items must be independent; results keyed by
// index so the outcome is identical for any worker count.
void parallel_for(size_t n, const std::function<void(size_t)>& fn);

}  // namespace npd::par
