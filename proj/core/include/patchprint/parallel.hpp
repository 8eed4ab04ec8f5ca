#pragma once

#include <cstdint>
#include <functional>

namespace patchprint {

// Fixed-size worker pool with a fork-join parallel_for. Work is split into
// contiguous index ranges and every output element is produced by exactly one
// invocation, so results never depend on the worker count. Reductions that
// would depend on summation order are the caller's job to serialize.
int thread_count();                 // PATCHPRINT_THREADS env or hardware count, >= 1
void set_thread_count(int n);       // 0 resets to the default

void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& range_fn);

}  // namespace patchprint
