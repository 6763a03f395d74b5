#pragma once

#include <functional>

namespace nhaze {

/// Worker count used by the row-parallel kernels. Defaults to 1.
int thread_count();
void set_thread_count(int n);

/// Runs body(begin, end) over contiguous chunks of [0, n). Each index is
/// visited exactly once; chunks never share output rows, so results do not
/// depend on the worker count.
void parallel_for(int n, const std::function<void(int, int)>& body);

}  // namespace nhaze
