#pragma once

#include <cstddef>
#include <functional>

namespace sslgmm {

// Runs fn(0..n-1) on up to `threads` workers (<= 1 runs inline). Tasks are claimed in
// index order; callers write results by index so output does not depend on scheduling.
// The first exception thrown by any task is rethrown after all workers join.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace sslgmm
