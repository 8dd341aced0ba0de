#pragma once

#include <cstddef>
#include <functional>

namespace illiq {

/// Worker count: hardware concurrency, capped by ILLIQ_THREADS when set.
unsigned worker_count();

/// Runs body(i) for i in [0, n) on up to worker_count() threads, in
/// contiguous blocks. Bodies must write to disjoint outputs.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace illiq
