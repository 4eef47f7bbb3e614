#pragma once

#include <cstddef>
#include <functional>

namespace gdnn {

/// Worker cap from GDNN_THREADS, else the hardware concurrency (at least 1).
std::size_t worker_threads();

/// Runs task(0) .. task(count-1) over up to `threads` workers. Tasks must
/// write disjoint outputs; results then do not depend on scheduling.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& task,
                  std::size_t threads = 0);

}  // namespace gdnn
