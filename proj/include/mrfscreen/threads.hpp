#pragma once

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace mrfscreen {

/// Worker cap: min(hardware, MRFSCREEN_THREADS). At least 1.
inline int thread_budget() {
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw <= 0) hw = 1;
    if (const char* env = std::getenv("MRFSCREEN_THREADS")) {
        const int cap = std::atoi(env);
        if (cap >= 1) hw = std::min(hw, cap);
    }
    return hw;
}

/// Runs fn(i) for i in [0, count). Tasks must be independent; each task
/// writes only to its own output slot, so parallel and sequential execution
/// produce identical results.
inline void parallel_for(long count, const std::function<void(long)>& fn) {
    const int workers = std::min<long>(thread_budget(), count);
    if (workers <= 1) {
        for (long i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w]() {
            for (long i = w; i < count; i += workers) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace mrfscreen
