#pragma once

#include <cstddef>
#include <functional>

namespace cylising {

// Worker count from CYLISING_THREADS (default: hardware concurrency, at least 1).
int thread_count();

// Runs body(i) for i in [0, n) on the worker pool; results must be written to disjoint slots.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace cylising
