/* SPDX-FileCopyrightText: 2026 GaussianSSC Authors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#include "gssc/adam.hpp"
#include "gssc/error.hpp"

#include <fmt/format.h>

#include <cmath>

namespace gssc {

    void adam_step(std::span<NdBuffer> params, std::span<const NdBuffer> grads, OptimizerState& state) {
        if (params.size() != grads.size())
            throw DimensionError(fmt::format("adam_step: {} parameters but {} gradients", params.size(), grads.size()));
        if (state.first_moment.empty()) {
            for (const auto& p : params) {
                state.first_moment.emplace_back(p.shape(), 0.0);
                state.second_moment.emplace_back(p.shape(), 0.0);
            }
        }
        if (state.first_moment.size() != params.size())
            throw DimensionError(fmt::format("adam_step: state tracks {} parameters, got {}",
                                             state.first_moment.size(), params.size()));
        for (std::size_t k = 0; k < params.size(); ++k) {
            require_same_shape(params[k], grads[k], "adam_step gradient");
            require_same_shape(params[k], state.first_moment[k], "adam_step moment");
        }

        ++state.step;
        const double t = static_cast<double>(state.step);
        const double bc1 = 1.0 - std::pow(state.beta1, t);
        const double bc2 = 1.0 - std::pow(state.beta2, t);
        for (std::size_t k = 0; k < params.size(); ++k) {
            auto p = params[k].data();
            const auto g = grads[k].data();
            auto m = state.first_moment[k].data();
            auto v = state.second_moment[k].data();
            for (std::size_t i = 0; i < p.size(); ++i) {
                m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
                v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
                const double mhat = m[i] / bc1;
                const double vhat = v[i] / bc2;
                p[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
            }
        }
    }

} // namespace gssc
