#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace dxmem {

// Applies fn(i) for i in [0, count) across up to `workers` threads and
// returns results in index order, so downstream reductions are
// scheduling-independent. The first exception (by index) is rethrown.
template <typename Result>
std::vector<Result> parallel_index_map(std::size_t count, int workers,
                                       const std::function<Result(std::size_t)>& fn) {
    std::vector<Result> results(count);
    if (count == 0) return results;
    std::vector<std::exception_ptr> errors(count);

    const int n_threads = std::max(1, std::min<int>(workers, static_cast<int>(count)));
    if (n_threads == 1) {
        for (std::size_t i = 0; i < count; ++i) {
            try {
                results[i] = fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    } else {
        std::atomic<std::size_t> next{0};
        auto worker = [&]() {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count) return;
                try {
                    results[i] = fn(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        };
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(n_threads));
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    return results;
}

}  // namespace dxmem
