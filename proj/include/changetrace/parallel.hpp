#pragma once

// Minimal static-partition parallel loop. Work is split into contiguous
// shards so results can be merged in shard order, which keeps outputs
// independent of the thread count.

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace ct {

/// 0 means hardware concurrency.
void set_thread_count(unsigned n);
unsigned thread_count();

/// Calls body(shard, begin, end) for each shard; returns the shard count.
template <class Body>
std::size_t parallel_shards(std::size_t n, Body&& body, std::size_t min_per_shard = 1024)
{
    const std::size_t threads = std::max<std::size_t>(1, thread_count());
    const std::size_t shards = std::max<std::size_t>(1, std::min(threads, n / std::max<std::size_t>(1, min_per_shard)));
    if (shards == 1) {
        body(std::size_t{0}, std::size_t{0}, n);
        return 1;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(shards);
    for (std::size_t s = 0; s < shards; ++s) {
        const std::size_t begin = n * s / shards, end = n * (s + 1) / shards;
        pool.emplace_back([&, s, begin, end] {
            try {
                body(s, begin, end);
            } catch (...) {
                errors[s] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return shards;
}

template <class Body>
void parallel_for(std::size_t n, Body&& body, std::size_t min_per_shard = 1024)
{
    parallel_shards(
        n,
        [&](std::size_t, std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) body(i);
        },
        min_per_shard);
}

}  // namespace ct
