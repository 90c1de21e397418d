#ifndef CMFKIT_PARALLEL_HPP
#define CMFKIT_PARALLEL_HPP

#include <cstddef>
#include <functional>

namespace cmfkit {

/// Worker count used by parallel_for. Starts at 1 (or CMFKIT_THREADS if set).
int worker_count();
void set_worker_count(int n);

/// Runs fn(begin, end) over a partition of [0, n). With one worker the call
/// is inline. Ranges are contiguous, so per-voxel sweeps stay deterministic
/// as long as each voxel is written by exactly one range.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

} // namespace cmfkit

#endif
