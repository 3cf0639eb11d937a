/* SPDX-FileCopyrightText: 2026 GaussianSSC Authors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include "gssc/ndbuffer.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace gssc {

    struct OptimizerState {
        double lr = 1e-3;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
        std::int64_t step = 0;
        std::vector<NdBuffer> first_moment;
        std::vector<NdBuffer> second_moment;
    };

    /// One bias-corrected Adam update. Moment buffers are created on the first
    /// call; afterwards their shapes must match the parameters.
    void adam_step(std::span<NdBuffer> params, std::span<const NdBuffer> grads, OptimizerState& state);

} // namespace gssc
