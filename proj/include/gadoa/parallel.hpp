#pragma once

#include <cstddef>
#include <functional>

namespace gadoa {

/// Runs body(i) for i in [0, n) on up to `threads` workers. The first
/// exception is rethrown after all workers stop.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& body);

}  // namespace gadoa
