/* SPDX-FileCopyrightText: 2026 GaussianSSC Authors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include "gssc/gradcheck.hpp"
#include "gssc/nn.hpp"

#include <functional>
#include <random>
#include <vector>

namespace gssc::testing {

    inline NdBuffer random_buffer(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
        NdBuffer b(std::move(shape));
        std::uniform_real_distribution<double> dist(lo, hi);
        for (auto& v : b.storage())
            v = dist(rng);
        return b;
    }

    /// grad_check over every parameter of a store; extra constant inputs are
    /// captured by the closure.
    inline GradCheckReport param_grad_check(const ParamStore& store, const std::function<Var(Graph&)>& f,
                                            std::uint64_t seed = 0x5eedULL) {
        const auto& inputs = store.values();
        return grad_check(
            [&](Tape& tape, std::span<const Var> vars) {
                Graph g(tape, store, vars);
                return f(g);
            },
            inputs, 1e-6, seed);
    }

} // namespace gssc::testing
