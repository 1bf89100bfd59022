#pragma once

#include <cstddef>
#include <functional>

namespace splinedeconv {

/// Worker count: SPLINEDECONV_THREADS when set to a positive integer,
/// otherwise the hardware concurrency (at least 1).
int default_worker_count();

/// Runs body(i) for i in [0, count) on up to `threads` workers (0 means
/// default_worker_count()). Indices are handed out dynamically; the first
/// exception thrown by any body is rethrown after all workers finish.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body,
                  int threads = 0);

}  // namespace splinedeconv
