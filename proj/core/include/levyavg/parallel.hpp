#pragma once

#include <cstddef>
#include <functional>
#include <optional>

namespace levyavg {

/// Thread count from an explicit request, else LEVYAVG_THREADS, else the
/// hardware concurrency (at least 1).
unsigned resolve_threads(std::optional<unsigned> requested = std::nullopt);

/// Runs body(i) for i in [0, n) on `threads` workers. Workers claim indices
/// from a shared atomic cursor, so idle workers pick up the remaining cells
/// of slower ones. Results must be written to per-index slots; the first
/// exception thrown by any body is rethrown after all workers join.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body);

}  // namespace levyavg
