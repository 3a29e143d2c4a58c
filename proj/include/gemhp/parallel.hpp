#pragma once

#include <cstddef>
#include <functional>

namespace gemhp {

/// Hardware concurrency, at least 1.
[[nodiscard]] int default_workers() noexcept;

/// Runs fn(i) for every i in [0, n) on up to `workers` threads. Tasks are
/// claimed in index order; if any throw, the exception of the lowest index
/// is rethrown after all threads finish.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

} // namespace gemhp
