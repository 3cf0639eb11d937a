/* SPDX-FileCopyrightText: 2026 GaussianSSC Authors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include "gssc/tape.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace gssc {

    /// A differentiable kernel under test: maps leaf variables (one per input
    /// buffer, same order) to an output variable on the same tape.
    using DiffKernel = std::function<Var(Tape&, std::span<const Var>)>;

    struct GradCheckReport {
        double max_rel_error = 0.0;
        std::size_t worst_input = 0;
        std::size_t worst_element = 0;
        double analytic = 0.0;
        double numeric = 0.0;
        std::size_t checked = 0;
    };

    /// Compares the tape gradient of <R, op(inputs)> against central differences
    /// with step h, where R is a fixed random projection drawn from seed. The
    /// error per element is |analytic - numeric| / max(1, |numeric|).
    /// Throws NumericError when a forward value is not finite.
    GradCheckReport grad_check(const DiffKernel& op, std::span<const NdBuffer> inputs, double h = 1e-6,
                               std::uint64_t seed = 0x5eedULL);

} // namespace gssc
