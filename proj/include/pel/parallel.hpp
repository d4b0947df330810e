#pragma once

#include <algorithm>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace pel {

// Worker count used by parallel_for when the caller passes 0.
int default_workers();
void set_default_workers(int workers);

// Splits [begin, end) into contiguous chunks across threads. Results must not
// depend on the partition: every task we run derives per-row randomness from
// the row index, and reductions that feed reports are done serially.
void parallel_for(int64_t begin, int64_t end, int workers, const std::function<void(int64_t, int64_t)>& body);

inline void parallel_for_rows(int64_t n, int workers, const std::function<void(int64_t)>& row_body) {
    parallel_for(0, n, workers, [&](int64_t lo, int64_t hi) {
        for (int64_t i = lo; i < hi; ++i) row_body(i);
    });
}

}  // namespace pel
