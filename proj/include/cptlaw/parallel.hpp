#pragma once

#include <cstdint>
#include <functional>

namespace cptlaw {

/// Worker-thread cap: CPTLAW_THREADS if set (>=1), else hardware concurrency.
int thread_cap();

/// Runs body(i) for i in [0, n). Work items must be independent; results
/// should be written to preallocated slots so the outcome does not depend
/// on thread scheduling.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& body);

}  // namespace cptlaw
