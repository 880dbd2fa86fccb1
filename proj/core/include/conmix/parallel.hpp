#ifndef CONMIX_PARALLEL_HPP
#define CONMIX_PARALLEL_HPP

#include <cstddef>
#include <functional>

namespace conmix {

/// Worker count: CONMIX_THREADS when set, otherwise hardware concurrency.
int worker_count();

/// Runs fn(i) for i in [0, n). Work is split into contiguous blocks, so the
/// caller decides the reduction order and results do not depend on the
/// number of workers. The first exception thrown by any worker is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                  std::size_t min_per_worker = 32);

} // namespace conmix

#endif
