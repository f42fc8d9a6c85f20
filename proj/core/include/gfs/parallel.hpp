#pragma once

#include <cstddef>
#include <functional>

namespace gfs {

/// Worker count used when a caller passes 0: the value set by
/// set_default_workers, else the GFS_WORKERS environment variable, else the
/// hardware concurrency.
int default_workers();
void set_default_workers(int workers);

/// Splits [0, n) into `workers` contiguous blocks and runs
/// fn(begin, end, worker_index) on each, joining before returning. Block
/// boundaries depend only on n and the worker count.
void parallel_for(std::size_t n, int workers,
                  const std::function<void(std::size_t, std::size_t, int)>& fn);

}  // namespace gfs
