#pragma once

#include <cstdint>
#include <functional>

namespace neon {

// Worker count used by parallel_for_chunks. 0 restores the hardware default.
void set_thread_count(int n);
int thread_count();

// Number of chunks parallel_for_chunks will use for a given n.
int chunk_count(std::int64_t n);

// Runs fn(chunk, begin, end) over a fixed partition of [0, n).
// The partition depends only on n, never on the worker count, so any
// cross-chunk reduction performed in chunk order afterwards is reproducible
// for every thread count, including 1.
void parallel_for_chunks(
    std::int64_t n,
    const std::function<void(int, std::int64_t, std::int64_t)>& fn);

}  // namespace neon
