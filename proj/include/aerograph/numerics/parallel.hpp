#pragma once

#include <cstddef>
#include <functional>

namespace aerograph {

/// Runs body(i) for i in [0, count) on up to `workers` threads (0 = one per
/// hardware thread). Each index runs exactly once; callers write results to
/// slot i, so output order never depends on scheduling. The first exception
/// thrown by any body is rethrown after all threads join.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body, std::size_t workers = 0);

}  // namespace aerograph
