#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace meshray {

/// 0 selects the hardware concurrency.
inline unsigned resolve_threads(unsigned requested)
{
    if (requested != 0) return requested;
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(task) for every task in [0, n_tasks) on up to `threads` workers.
/// Tasks are claimed dynamically; the first exception is rethrown.
template <typename Fn>
void parallel_for(std::size_t n_tasks, unsigned threads, Fn&& fn)
{
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(resolve_threads(threads), n_tasks));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n_tasks; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto work = [&] {
        try {
            for (std::size_t i = next++; i < n_tasks; i = next++) fn(i);
        } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
            next = n_tasks;
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace meshray
