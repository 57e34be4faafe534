#include "icescope/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace icescope {

namespace {
std::atomic<std::size_t> g_threads{0};
thread_local bool t_in_worker = false;  // nested calls run serially on the calling worker
}

void set_default_threads(std::size_t n) { g_threads.store(n); }

std::size_t default_threads() {
    const std::size_t n = g_threads.load();
    if (n > 0) return n;
    return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n_tasks, const std::function<void(std::size_t)>& task, std::size_t threads) {
    if (threads == 0) threads = default_threads();
    threads = std::min(threads, n_tasks);
    if (threads <= 1 || t_in_worker) {
        for (std::size_t i = 0; i < n_tasks; ++i) task(i);
        return;
    }

    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;

    auto worker = [&] {
        const bool outer = t_in_worker;
        t_in_worker = true;
        struct Restore {
            bool v;
            ~Restore() { t_in_worker = v; }
        } restore{outer};
        while (!failed.load()) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n_tasks) return;
            try {
                task(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                failed.store(true);
            }
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(threads - 1);
    for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace icescope
