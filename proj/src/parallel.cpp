#include "stabsde/parallel.hpp"

#include <atomic>
#include <exception>
#include <thread>
#include <vector>

namespace stabsde {

namespace {
std::atomic<int> g_threads{1};
}

void set_threads(int n) { g_threads = n < 1 ? 1 : n; }

int threads() { return g_threads; }

void parallel_for(long begin, long end, const std::function<void(long)>& body)
{
    long n = end - begin;
    int nt = static_cast<int>(std::min<long>(g_threads, n));
    if (nt <= 1) {
        for (long i = begin; i < end; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errs(nt);
    for (int w = 0; w < nt; ++w) {
        long a = begin + n * w / nt, b = begin + n * (w + 1) / nt;
        pool.emplace_back([&, a, b, w] {
            try {
                for (long i = a; i < b; ++i) body(i);
            } catch (...) {
                errs[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errs)
        if (e) std::rethrow_exception(e);
}

} // namespace stabsde
