#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace slsim {

// Runs fn(chunk) for chunk = 0..n_chunks-1 on up to n_threads workers.
// Chunks are claimed from an atomic counter; callers must write disjoint
// output so results are independent of the worker schedule.
inline void parallel_chunks(int n_chunks, int n_threads, const std::function<void(int)>& fn) {
    n_threads = std::max(1, std::min(n_threads, n_chunks));
    if (n_threads == 1) {
        for (int i = 0; i < n_chunks; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr err;
    std::mutex err_mutex;
    auto worker = [&] {
        for (;;) {
            int i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= n_chunks) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!err) err = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

// Splits [begin, end) into n_chunks contiguous row ranges (first chunks one
// longer when the split is uneven) and processes them in parallel.
inline void parallel_rows(int begin, int end, int n_chunks, int n_threads,
                          const std::function<void(int, int)>& fn) {
    int n = end - begin;
    if (n <= 0) return;
    n_chunks = std::max(1, std::min(n_chunks, n));
    int base = n / n_chunks, extra = n % n_chunks;
    std::vector<std::pair<int, int>> ranges;
    ranges.reserve(n_chunks);
    int at = begin;
    for (int i = 0; i < n_chunks; ++i) {
        int len = base + (i < extra ? 1 : 0);
        ranges.emplace_back(at, at + len);
        at += len;
    }
    parallel_chunks(n_chunks, n_threads, [&](int i) { fn(ranges[i].first, ranges[i].second); });
}

} // namespace slsim
