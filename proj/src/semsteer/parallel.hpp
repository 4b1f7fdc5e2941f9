#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace semsteer {

/// Runs fn(i) for i in [0, n) on at most `max_parallel` threads. Exceptions are
/// captured per index rather than aborting the batch.
template <typename Fn>
std::vector<std::exception_ptr> parallel_for(std::size_t n, int max_parallel, Fn&& fn) {
    std::vector<std::exception_ptr> errors(n);
    if (n == 0) return errors;
    const auto workers = static_cast<std::size_t>(std::clamp<long>(max_parallel, 1, static_cast<long>(n)));
    auto run_one = [&](std::size_t i) {
        try {
            fn(i);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) run_one(i);
        return errors;
    }
    std::atomic<std::size_t> next{0};
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) run_one(i);
            });
        }
    }
    return errors;
}

} // namespace semsteer
