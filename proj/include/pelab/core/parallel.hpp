#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace pelab {

/// Work items per reduction chunk. Fixed so that reductions do not depend on
/// how many workers run them.
inline constexpr std::size_t kReductionChunk = 2048;

inline unsigned resolve_workers(unsigned requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1u : hw;
}

/// Calls body(i) for i in [0, n). Items are split into contiguous blocks, one
/// per worker; the first exception thrown by any worker is rethrown.
template <class Body>
void parallel_for(std::size_t n, unsigned workers, Body&& body) {
    workers = std::max(1u, std::min<unsigned>(resolve_workers(workers), static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        const std::size_t begin = n * w / workers;
        const std::size_t end = n * (w + 1) / workers;
        pool.emplace_back([&, begin, end] {
            try {
                for (std::size_t i = begin; i < end; ++i) body(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

/// Map over fixed-size chunks of [0, n) and fold the chunk results in chunk
/// order. map(begin, end) -> T, combine(T&, const T&).
template <class T, class Map, class Combine>
T ordered_reduce(std::size_t n, unsigned workers, T init, Map&& map, Combine&& combine) {
    const std::size_t chunks = (n + kReductionChunk - 1) / kReductionChunk;
    std::vector<T> partial(chunks, init);
    parallel_for(chunks, workers, [&](std::size_t c) {
        const std::size_t begin = c * kReductionChunk;
        partial[c] = map(begin, std::min(n, begin + kReductionChunk));
    });
    for (const auto& p : partial) combine(init, p);
    return init;
}

}  // namespace pelab
