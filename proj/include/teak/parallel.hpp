#pragma once

#include <cstddef>
#include <functional>

namespace teak {

enum class Execution { serial, parallel };

/// Calls fn(i) for i in [0, n). The parallel variant distributes indices over
/// OpenMP threads; the serial variant runs them in order and is the reference
/// the parallel path is tested against. In both, an exception thrown for index
/// i is rethrown after the loop, the lowest failing index winning.
void for_each_index(std::size_t n, Execution exec, const std::function<void(std::size_t)>& fn);

/// Threads the parallel variant will use.
int parallel_threads();

} // namespace teak
