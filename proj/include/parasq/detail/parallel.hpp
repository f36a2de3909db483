#pragma once

#include <exception>
#include <thread>
#include <vector>

namespace parasq {

template <class Fn>
void parallel_for(int64_t n, Fn&& fn) {
    int64_t nt = thread_count();
    if (nt <= 1 || n <= 1) {
        for (int64_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(static_cast<size_t>(nt));
    std::vector<std::thread> pool;
    for (int64_t t = 0; t < nt; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (int64_t i = t; i < n; i += nt) fn(i);
            } catch (...) {
                errors[static_cast<size_t>(t)] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace parasq
