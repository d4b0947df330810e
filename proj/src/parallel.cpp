#include "pel/parallel.hpp"

#include <atomic>

namespace pel {

namespace {
std::atomic<int> g_default_workers{0};
}

int default_workers() {
    int w = g_default_workers.load();
    if (w > 0) return w;
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

void set_default_workers(int workers) { g_default_workers.store(workers); }

void parallel_for(int64_t begin, int64_t end, int workers, const std::function<void(int64_t, int64_t)>& body) {
    const int64_t total = end - begin;
    if (total <= 0) return;
    if (workers <= 0) workers = default_workers();
    const int64_t nthreads = std::min<int64_t>(workers, total);
    if (nthreads <= 1) {
        body(begin, end);
        return;
    }

    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(nthreads));
    std::exception_ptr first_error;
    std::mutex error_mutex;
    const int64_t chunk = (total + nthreads - 1) / nthreads;
    for (int64_t t = 0; t < nthreads; ++t) {
        const int64_t lo = begin + t * chunk;
        const int64_t hi = std::min(end, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&, lo, hi] {
            try {
                body(lo, hi);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace pel
