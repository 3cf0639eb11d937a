/* SPDX-FileCopyrightText: 2026 GaussianSSC Authors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include "gssc/gradcheck.hpp"

#include <functional>
#include <string>
#include <vector>

namespace gssc::cli {

    inline constexpr double kOpTolerance = 1e-5;
    inline constexpr double kPipelineTolerance = 1e-4;

    struct CheckResult {
        std::string name;
        double max_rel_error = 0.0;
        double tolerance = 0.0;
        std::size_t checked = 0;
        std::string worst;  // input/element of the worst entry
        std::string error;  // set when the check threw
        double seconds = 0.0;

        [[nodiscard]] bool passed() const { return error.empty() && max_rel_error <= tolerance; }
    };

    struct SuiteOptions {
        /// Name of a check whose output gets a corrupted backward (scaled by 2).
        /// Used as a negative control; empty leaves every check intact.
        std::string corrupt;
        /// Runs only checks whose name contains this substring.
        std::string filter;
    };

    /// Names of every check, ops first then the two stage pipelines.
    std::vector<std::string> gradcheck_names();

    /// Runs the suite in order. on_result is called after each check.
    std::vector<CheckResult> run_gradcheck_suite(const SuiteOptions& options = {},
                                                 const std::function<void(const CheckResult&)>& on_result = {});

    /// One JSON object on a single line.
    std::string to_json(const CheckResult& r);

    /// Identity forward, backward multiplied by factor.
    Var skew_backward(Var x, double factor);

} // namespace gssc::cli
