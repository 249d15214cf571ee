#pragma once

#include <cstdint>
#include <functional>

namespace stodec {

/// Worker-thread cap for the data-parallel sweeps (path simulation, grid
/// sweeps, regression row assembly). Every parallel loop in the library
/// writes to disjoint slots and performs no cross-item reductions, so the
/// results are bitwise identical for any thread count.
int worker_threads();
void set_worker_threads(int n);

/// Runs fn(begin, end) over a contiguous partition of [0, n).
/// Exceptions from workers are captured and the first one is rethrown.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn);

}  // namespace stodec
