#pragma once

#include <atomic>
#include <cstdint>

namespace rill::counters {

/// Instrumentation used to verify that the meta machinery is fully bypassed
/// when no behavior is requested.
std::atomic<std::uint64_t>& meta_cells_allocated();
std::atomic<std::uint64_t>& meta_items_allocated();
void reset();

}  // namespace rill::counters
