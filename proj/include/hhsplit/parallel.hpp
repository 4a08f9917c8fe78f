#pragma once

#include <cstdint>
#include <functional>

namespace hhsplit {

/// Runs body(i) for i in [0, n) on up to `threads` workers. Callers write
/// results into per-index slots and reduce afterwards in index order, which
/// keeps every study bit-identical for any worker count. The first exception
/// thrown by a worker is rethrown on the calling thread.
void parallel_for(std::int64_t n, int threads, const std::function<void(std::int64_t)>& body);

}  // namespace hhsplit
