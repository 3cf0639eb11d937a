/* SPDX-FileCopyrightText: 2026 GaussianSSC Authors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#include "gssc/parallel.hpp"
#include "gssc/error.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>
#include <vector>

namespace gssc {

    namespace {
        std::atomic<int> g_threads{1};
    }

    void set_num_threads(int threads) {
        if (threads < 1)
            throw ConfigError("threads must be >= 1");
        g_threads.store(threads);
    }

    int num_threads() { return g_threads.load(); }

    void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body,
                      std::size_t grain) {
        if (n == 0)
            return;
        const auto threads = static_cast<std::size_t>(num_threads());
        const std::size_t chunks = std::min(threads, (n + grain - 1) / std::max<std::size_t>(grain, 1));
        if (chunks <= 1) {
            body(0, n);
            return;
        }
        const std::size_t step = (n + chunks - 1) / chunks;
        std::vector<std::thread> workers;
        std::vector<std::exception_ptr> errors(chunks);
        workers.reserve(chunks - 1);
        for (std::size_t c = 1; c < chunks; ++c) {
            const std::size_t begin = c * step;
            const std::size_t end = std::min(n, begin + step);
            if (begin >= end)
                break;
            workers.emplace_back([&, c, begin, end] {
                try {
                    body(begin, end);
                } catch (...) {
                    errors[c] = std::current_exception();
                }
            });
        }
        try {
            body(0, std::min(n, step));
        } catch (...) {
            errors[0] = std::current_exception();
        }
        for (auto& w : workers)
            w.join();
        for (auto& e : errors)
            if (e)
                std::rethrow_exception(e);
    }

} // namespace gssc
