#pragma once

#include <cstddef>
#include <functional>

namespace enkfcal {

// Upper bound on worker threads used by the library. 0 or 1 means sequential.
// Defaults to the ENKF_CAL_THREADS environment variable when set, otherwise
// sequential.
std::size_t max_threads();
void set_max_threads(std::size_t n);

// Runs body(i) for i in [0, n). Each index is visited exactly once; callers
// write results into index-addressed slots so the outcome never depends on
// scheduling. After all workers join, the exception from the lowest failing
// index is rethrown, as a sequential run would.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace enkfcal
