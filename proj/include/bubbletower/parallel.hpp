#pragma once

#include <cstddef>
#include <functional>

namespace bt {

// Worker count: hardware concurrency, capped by BUBBLETOWER_THREADS when set.
int worker_count();

// Runs body(i) for i in [0, count). Each index is handled by exactly one
// worker; callers write results into per-index slots so that the final
// reduction order never depends on scheduling.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace bt
