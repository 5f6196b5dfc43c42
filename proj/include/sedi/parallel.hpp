#pragma once

#include <cstddef>
#include <functional>

namespace sedi {

/// Worker count used when a call site passes threads = 0. Set from --threads.
int default_thread_count();
void set_default_thread_count(int n);

/// Runs fn(i) for i in [0, n). Iterations must be independent and write only
/// to their own output slots; reductions stay sequential so results are
/// identical for every thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, int threads = 0);

}  // namespace sedi
