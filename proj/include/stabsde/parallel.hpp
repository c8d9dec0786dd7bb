#pragma once

#include <functional>

namespace stabsde {

// Process-wide worker count; 0 or 1 runs everything on the calling thread.
void set_threads(int n);
int threads();

// Static block partition of [begin, end); body(i) must only write i-owned data.
void parallel_for(long begin, long end, const std::function<void(long)>& body);

} // namespace stabsde
