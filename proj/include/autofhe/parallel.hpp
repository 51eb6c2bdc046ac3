#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace autofhe {

// Process-wide worker budget. 0 = hardware concurrency. Parallel results must
// be identical for any budget; work is split into fixed chunks and reduced in
// chunk order, never in completion order.
inline int& thread_budget() {
    static int budget = 0;
    return budget;
}

inline int effective_threads() {
    int b = thread_budget();
    if (b <= 0) b = static_cast<int>(std::thread::hardware_concurrency());
    return std::max(1, b);
}

// Runs fn(chunk_index, begin, end) over [0, n) split into n_chunks fixed
// ranges. Chunk boundaries depend only on (n, n_chunks), so any thread budget
// computes the same per-chunk results.
template <typename Fn>
void parallel_chunks(std::size_t n, std::size_t n_chunks, Fn&& fn) {
    if (n == 0) return;
    n_chunks = std::max<std::size_t>(1, std::min(n_chunks, n));
    const std::size_t base = n / n_chunks;
    const std::size_t rem = n % n_chunks;
    auto chunk_range = [&](std::size_t c) {
        const std::size_t b = c * base + std::min(c, rem);
        const std::size_t e = b + base + (c < rem ? 1 : 0);
        return std::pair<std::size_t, std::size_t>(b, e);
    };

    const int workers = std::min<int>(effective_threads(), static_cast<int>(n_chunks));
    if (workers <= 1) {
        for (std::size_t c = 0; c < n_chunks; ++c) {
            auto [b, e] = chunk_range(c);
            fn(c, b, e);
        }
        return;
    }

    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (;;) {
            const std::size_t c = next.fetch_add(1);
            if (c >= n_chunks) break;
            auto [b, e] = chunk_range(c);
            fn(c, b, e);
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers) - 1);
    for (int t = 1; t < workers; ++t) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();
}

// Element-wise parallel map: out[i] = fn(i). Each element is independent, so
// this is deterministic for any budget.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    parallel_chunks(n, static_cast<std::size_t>(effective_threads()) * 4,
                    [&](std::size_t, std::size_t b, std::size_t e) {
                        for (std::size_t i = b; i < e; ++i) fn(i);
                    });
}

}  // namespace autofhe
