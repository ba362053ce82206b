#pragma once

#include <cstddef>
#include <functional>

namespace vpc {

/// Process-wide worker count for parallel loops (0 = hardware concurrency).
void set_worker_threads(unsigned n);
unsigned worker_threads();

/// Static-chunked fork/join loop over [0, n). Chunks are disjoint, so callers
/// that write only to slot i stay bit-deterministic for any thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace vpc
