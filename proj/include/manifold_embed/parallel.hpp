#pragma once

#include <cstdlib>
#include <thread>
#include <vector>

namespace manifold_embed {

// Worker cap: MANIFOLD_EMBED_THREADS, 0/unset = hardware concurrency.
inline unsigned max_threads() {
    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    if (const char* env = std::getenv("MANIFOLD_EMBED_THREADS")) {
        const long cap = std::strtol(env, nullptr, 10);
        if (cap > 0 && static_cast<unsigned>(cap) < hw) return static_cast<unsigned>(cap);
    }
    return hw;
}

// Runs fn(i) for i in [0, n). Each index is processed by exactly one worker,
// so results written to disjoint slots are independent of the thread count.
template <typename F>
void parallel_for(std::size_t n, F&& fn) {
    const unsigned workers = static_cast<unsigned>(
        std::min<std::size_t>(max_threads(), n == 0 ? 1 : n));
    if (workers <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += workers) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace manifold_embed
