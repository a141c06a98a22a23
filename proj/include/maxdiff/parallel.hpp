#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace maxdiff {

namespace detail {
inline std::atomic<unsigned>& default_threads_slot() {
    static std::atomic<unsigned> slot{1};
    return slot;
}
}  // namespace detail

inline unsigned default_threads() { return detail::default_threads_slot().load(); }
inline void set_default_threads(unsigned n) { detail::default_threads_slot().store(std::max(1u, n)); }

/// Fixed work-unit size for replicate loops. Independent of the thread count, so
/// per-chunk partial results and their ordered combination never depend on scheduling.
inline constexpr std::size_t kChunk = 128;

inline std::size_t chunk_count(std::size_t n, std::size_t chunk = kChunk) {
    return (n + chunk - 1) / chunk;
}

/// Runs fn(c) for every chunk index c in [0, n_chunks) on up to `threads` workers.
/// The first exception thrown by any worker is rethrown on the caller.
template <class Fn>
void for_each_chunk(std::size_t n_chunks, unsigned threads, Fn&& fn) {
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(1, n_chunks))));
    if (threads == 1) {
        for (std::size_t c = 0; c < n_chunks; ++c) fn(c);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t c = next.fetch_add(1);
            if (c >= n_chunks) return;
            try {
                fn(c);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next.store(n_chunks);
            }
        }
    };
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    pool.clear();
    if (error) std::rethrow_exception(error);
}

}  // namespace maxdiff
