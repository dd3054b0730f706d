#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace qgain {

/// Number of workers to use when the caller passes 0.
inline int default_workers() {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Runs body(i) for i in [0, n). Indices are dealt out in contiguous
/// chunks, one chunk per worker, so a fixed (n, workers) pair always maps the
/// same indices to the same worker. The first exception thrown is rethrown.
template <typename Body>
void parallel_for(std::size_t n, int workers, Body&& body) {
    if (workers <= 0) {
        workers = default_workers();
    }
    const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
    if (w <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            body(i);
        }
        return;
    }
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(w);
    for (std::size_t k = 0; k < w; ++k) {
        const std::size_t begin = n * k / w;
        const std::size_t end = n * (k + 1) / w;
        pool.emplace_back([&, begin, end] {
            try {
                for (std::size_t i = begin; i < end; ++i) {
                    body(i);
                }
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) {
                    failure = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) {
        t.join();
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

} // namespace qgain
