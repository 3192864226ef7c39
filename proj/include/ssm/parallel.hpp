#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace ssm {

// Thread count from SSM_THREADS, else hardware concurrency.
inline int default_threads() {
    if (const char* s = std::getenv("SSM_THREADS")) {
        int n = std::atoi(s);
        if (n > 0) return n;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

// Runs fn(i) for i in [0, n) on up to `threads` workers. Work is split into
// contiguous blocks so results never depend on scheduling.
template <class F>
void parallel_for(int n, int threads, F&& fn) {
    threads = std::max(1, std::min(threads, n));
    if (threads == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::exception_ptr err;
    std::mutex mu;
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            const int lo = n * t / threads, hi = n * (t + 1) / threads;
            try {
                for (int i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> g(mu);
                if (!err) err = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

}  // namespace ssm
