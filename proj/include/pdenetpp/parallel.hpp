#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>

namespace pdenetpp {

/// Worker count: PDENETPP_THREADS if set to a positive integer, otherwise the
/// hardware concurrency (at least 1).
std::size_t worker_count();

/// Runs body(i) for i in [0, n) on up to worker_count() threads. Each index is
/// handled exactly once; the first exception is rethrown after all workers stop.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

/// splitmix64 mix of (seed, stream), used to derive independent seeds.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace pdenetpp
