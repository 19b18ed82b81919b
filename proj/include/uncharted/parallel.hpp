#pragma once

#include <cstddef>
#include <functional>

namespace uncharted {

/// Worker count from the UF_THREADS environment variable, falling back to the
/// number of hardware threads. Always at least 1.
std::size_t default_threads();

/// Calls `body(i)` for every i in [0, count) on up to `threads` workers.
/// Work items must write only to their own slots; the first exception thrown
/// by any item is rethrown on the calling thread.
void parallel_for(std::size_t count, std::size_t threads,
                  const std::function<void(std::size_t)>& body);

}  // namespace uncharted
