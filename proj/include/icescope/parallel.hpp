#pragma once

#include <cstddef>
#include <functional>

namespace icescope {

/// Worker cap used when a call does not pass one. Defaults to the number of
/// hardware threads; 0 restores that default.
void set_default_threads(std::size_t n);
std::size_t default_threads();

/// Runs task(i) for i in [0, n_tasks) on up to `threads` workers (0 = default).
/// Tasks must write only to their own outputs; the first exception thrown by
/// any task is rethrown after all workers stop. Calls made from inside a
/// task run serially.
void parallel_for(std::size_t n_tasks, const std::function<void(std::size_t)>& task,
                  std::size_t threads = 0);

}  // namespace icescope
