// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>

namespace dcq {

/// Worker cap: hardware concurrency, lowered by the DCQ_THREADS environment variable.
std::size_t worker_count();

/// Runs fn(i) for i in [0, n) on up to worker_count() threads. Each index is
/// visited exactly once; callers write results into pre-sized slots so output
/// order never depends on scheduling. If any calls throw, the exception from the
/// lowest index is rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace dcq
