#pragma once

#include <cstdint>
#include <functional>

namespace photon_da {

/// Number of workers used by parallel_for: hardware concurrency, capped by
/// the PHOTON_DA_THREADS environment variable when it is set and positive.
int worker_count();

/// Runs body(begin, end) over a partition of [0, n) on a persistent worker
/// pool. Ranges are disjoint, so kernels that write only inside their range
/// produce bit-identical results for every worker count. Runs inline when
/// n is small or one worker is available.
void parallel_for(std::int64_t n,
                  const std::function<void(std::int64_t, std::int64_t)>& body);

}  // namespace photon_da
