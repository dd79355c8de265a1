#pragma once

#include <cstddef>
#include <exception>
#include <functional>

namespace sbvm {

// Worker count: SPARSE_BVM_THREADS when set (>= 1), else hardware concurrency.
std::size_t thread_count();

// Runs body(i) for i in [0, n). Tasks are statically partitioned; callers
// write results into slot i, so output never depends on scheduling. The first
// exception thrown by any task is rethrown after all workers join. Calls made
// from inside a worker run serially on that worker.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace sbvm
