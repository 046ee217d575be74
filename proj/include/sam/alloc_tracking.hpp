#pragma once

#include <cstddef>

#include "sam/bench.hpp"

namespace sam::alloc_tracking {

// Linking this library interposes malloc / free for the whole process and
// counts usable bytes of every live heap block.
std::size_t live_bytes();
std::size_t peak_bytes();
void reset_peak();

AllocationProbe probe();

}  // namespace sam::alloc_tracking
