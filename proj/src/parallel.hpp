#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace wpt::detail {

inline std::size_t worker_count(std::size_t work_items) {
    const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
    return std::max<std::size_t>(1, std::min(hw, work_items));
}

/// Calls body(begin, end) on contiguous chunks of [0, n) across worker
/// threads and rethrows the first exception. Chunks do not overlap, so a body
/// writing only its own indices needs no synchronization.
template <class Body>
void parallel_chunks(std::size_t n, Body&& body, std::size_t min_chunk = 1024) {
    const std::size_t workers = worker_count((n + min_chunk - 1) / std::max<std::size_t>(1, min_chunk));
    if (workers <= 1) {
        if (n) body(std::size_t{0}, n);
        return;
    }
    std::exception_ptr error;
    std::mutex error_mutex;
    {
        std::vector<std::jthread> threads;
        const std::size_t chunk = (n + workers - 1) / workers;
        for (std::size_t begin = 0; begin < n; begin += chunk) {
            const std::size_t end = std::min(n, begin + chunk);
            threads.emplace_back([&, begin, end] {
                try {
                    body(begin, end);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            });
        }
    }
    if (error) std::rethrow_exception(error);
}

}  // namespace wpt::detail
