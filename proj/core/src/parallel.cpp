#include "cmfkit/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <thread>
#include <vector>

namespace cmfkit {

namespace {

int initial_worker_count() {
    if (const char* env = std::getenv("CMFKIT_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    return 1;
}

std::atomic<int> g_workers{initial_worker_count()};

} // namespace

int worker_count() { return g_workers.load(); }

void set_worker_count(int n) {
    if (n < 1) throw std::invalid_argument("worker count must be >= 1");
    g_workers.store(n);
}

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn) {
    const int workers = std::min<std::size_t>(g_workers.load(), std::max<std::size_t>(n, 1));
    if (workers <= 1 || n < 4096) {
        fn(0, n);
        return;
    }
    const std::size_t stride = (n + workers - 1) / workers;
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (int w = 1; w < workers; ++w) {
        const std::size_t begin = stride * std::size_t(w);
        const std::size_t end = std::min(n, begin + stride);
        if (begin >= end) break;
        pool.emplace_back(fn, begin, end);
    }
    fn(0, std::min(n, stride));
    for (auto& t : pool) t.join();
}

} // namespace cmfkit
