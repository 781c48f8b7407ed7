#pragma once

#include <cstdint>
#include <functional>

namespace latentcast::numkit {

/// Worker count: LATENTCAST_THREADS if set, else hardware concurrency.
int thread_budget();

/// Keeps freed blocks in the heap instead of returning them to the OS. Large
/// short-lived tensors otherwise page-fault on every allocation. Call once at
/// program start.
void configure_allocator();

/// Runs fn(i) for i in [0, n) across up to thread_budget() threads. Units must
/// be independent and write to disjoint outputs, so results do not depend on
/// scheduling. The first exception thrown by any unit is rethrown.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& fn);

}  // namespace latentcast::numkit
