#include "jnn/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace jnn {

static int default_threads() {
    if (const char* env = std::getenv("JNN_THREADS")) {
        int n = std::atoi(env);
        if (n >= 1) return n;
    }
    unsigned hc = std::thread::hardware_concurrency();
    return static_cast<int>(std::min(hc == 0 ? 1u : hc, 4u));
}

static std::atomic<int> g_threads{0};

int num_threads() {
    int n = g_threads.load(std::memory_order_relaxed);
    if (n == 0) {
        n = default_threads();
        g_threads.store(n, std::memory_order_relaxed);
    }
    return n;
}

void set_num_threads(int n) { g_threads.store(n < 1 ? 1 : n, std::memory_order_relaxed); }

void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn) {
    if (n <= 0) return;
    int nt = num_threads();
    if (nt <= 1 || n < 2 * nt) {
        fn(0, n);
        return;
    }
    int64_t chunk = (n + nt - 1) / nt;
    std::vector<std::thread> workers;
    workers.reserve(static_cast<size_t>(nt - 1));
    int64_t begin = chunk;  // first chunk runs on the calling thread
    for (int t = 1; t < nt && begin < n; ++t, begin += chunk)
        workers.emplace_back(fn, begin, std::min(begin + chunk, n));
    fn(0, std::min(chunk, n));
    for (auto& w : workers) w.join();
}

}  // namespace jnn
