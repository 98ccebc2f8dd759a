#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace seanav {

inline int hardware_threads() {
    const unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : static_cast<int>(n);
}

// Runs fn(chunk_index, begin, end) over [0, count) split into num_chunks
// contiguous chunks. Chunk boundaries depend only on (count, num_chunks), so
// per-chunk accumulators reduced in chunk order give results independent of
// how many worker threads actually ran.
inline void parallel_chunks(std::size_t count, int num_chunks, int num_threads,
                            const std::function<void(int, std::size_t, std::size_t)>& fn) {
    if (count == 0 || num_chunks <= 0) return;
    const auto chunks = static_cast<std::size_t>(num_chunks);
    const std::size_t base = count / chunks;
    const std::size_t rem = count % chunks;
    auto chunk_begin = [&](std::size_t c) { return c * base + std::min(c, rem); };

    if (num_threads <= 1 || count < 2) {
        for (std::size_t c = 0; c < chunks; ++c) {
            const std::size_t b = chunk_begin(c);
            const std::size_t e = chunk_begin(c + 1);
            if (b < e) fn(static_cast<int>(c), b, e);
        }
        return;
    }

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t c = next.fetch_add(1);
            if (c >= chunks) return;
            const std::size_t b = chunk_begin(c);
            const std::size_t e = chunk_begin(c + 1);
            if (b < e) fn(static_cast<int>(c), b, e);
        }
    };

    const int workers = std::min<int>(num_threads, static_cast<int>(chunks));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers) - 1);
    for (int i = 1; i < workers; ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
}

}  // namespace seanav
