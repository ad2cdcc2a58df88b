#pragma once

#include <cstdint>
#include <functional>

namespace protofaith {

/// Worker count from PROTOFAITH_THREADS, clamped to [1, 64]; defaults to 1.
int thread_count_from_env();

/// Runs fn(0..n-1) across `threads` workers. Each index is independent; the
/// caller owns result slots, so completion order never affects output order.
void parallel_for(std::int64_t n, int threads, const std::function<void(std::int64_t)>& fn);

}  // namespace protofaith
