#pragma once

#include <atomic>
#include <cstdlib>
#include <exception>
#include <functional>
#include <thread>
#include <type_traits>
#include <vector>

namespace autoode {

// Number of worker threads to use: explicit request > AUTOODE_THREADS env
// variable > hardware concurrency. Always at least 1.
inline int resolve_threads(int requested = 0) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("AUTOODE_THREADS")) {
        int n = std::atoi(env);
        if (n > 0) return n;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

// Apply fn to indices [0, n) on up to `threads` workers. Results land at
// their own index, so the output ordering is deterministic no matter how the
// scheduler interleaves workers. fn must not touch shared mutable state;
// the first exception thrown is rethrown on the calling thread.
template <class Fn>
auto parallel_map(int n, Fn&& fn, int threads = 0) {
    using R = std::invoke_result_t<Fn&, int>;
    static_assert(!std::is_void_v<R>, "parallel_map expects a value-returning fn");
    std::vector<R> out(static_cast<size_t>(n));
    if (n == 0) return out;
    int workers = std::min(resolve_threads(threads), n);
    if (workers <= 1) {
        for (int i = 0; i < n; ++i) out[static_cast<size_t>(i)] = fn(i);
        return out;
    }
    std::atomic<int> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    std::atomic<int> error_guard{0};
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                int i = next.fetch_add(1);
                if (i >= n || failed.load()) return;
                try {
                    out[static_cast<size_t>(i)] = fn(i);
                } catch (...) {
                    if (error_guard.fetch_add(1) == 0) first_error = std::current_exception();
                    failed.store(true);
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failed.load()) std::rethrow_exception(first_error);
    return out;
}

}  // namespace autoode
