/* SPDX-FileCopyrightText: 2026 GaussianSSC Authors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include <cstddef>
#include <functional>

namespace gssc {

    /// Worker count used by data-parallel kernels. 1 runs everything inline.
    void set_num_threads(int threads);
    int num_threads();

    /// Splits [0, n) into contiguous ranges and calls body(begin, end) on each.
    /// Callers must write disjoint outputs per index; every kernel computes each
    /// output element with a fixed serial loop, so results do not depend on the
    /// thread count.
    void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body,
                      std::size_t grain = 256);

} // namespace gssc
