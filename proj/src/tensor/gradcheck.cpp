/* SPDX-FileCopyrightText: 2026 GaussianSSC Authors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#include "gssc/gradcheck.hpp"
#include "gssc/error.hpp"
#include "gssc/ops.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <random>

namespace gssc {

    namespace {
        double projected_output(const DiffKernel& op, const std::vector<NdBuffer>& inputs, const NdBuffer& projection) {
            Tape tape;
            std::vector<Var> vars;
            vars.reserve(inputs.size());
            for (const auto& in : inputs)
                vars.push_back(tape.constant(in));
            const Var out = op(tape, vars);
            const NdBuffer& value = out.value();
            require_same_shape(value, projection, "grad_check output");
            double acc = 0.0;
            for (std::size_t i = 0; i < value.size(); ++i) {
                if (!std::isfinite(value[i]))
                    throw NumericError(fmt::format("grad_check: non-finite forward value at element {}", i));
                acc += value[i] * projection[i];
            }
            return acc;
        }
    } // namespace

    GradCheckReport grad_check(const DiffKernel& op, std::span<const NdBuffer> inputs, double h, std::uint64_t seed) {
        std::vector<NdBuffer> work(inputs.begin(), inputs.end());

        Tape tape;
        std::vector<Var> leaves;
        for (const auto& in : work)
            leaves.push_back(tape.leaf(in));
        const Var out = op(tape, leaves);
        for (double v : out.value().data())
            if (!std::isfinite(v))
                throw NumericError("grad_check: non-finite forward value");

        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> unit(-1.0, 1.0);
        NdBuffer projection(out.value().shape());
        for (auto& v : projection.storage())
            v = unit(rng);

        const Var loss = ops::dot(out, projection);
        tape.backward(loss);

        GradCheckReport report;
        for (std::size_t k = 0; k < work.size(); ++k) {
            const NdBuffer* analytic = tape.grad(leaves[k]);
            for (std::size_t i = 0; i < work[k].size(); ++i) {
                const double original = work[k][i];
                work[k][i] = original + h;
                const double plus = projected_output(op, work, projection);
                work[k][i] = original - h;
                const double minus = projected_output(op, work, projection);
                work[k][i] = original;

                const double numeric = (plus - minus) / (2.0 * h);
                const double a = analytic ? (*analytic)[i] : 0.0;
                const double err = std::abs(a - numeric) / std::max(1.0, std::abs(numeric));
                ++report.checked;
                if (err > report.max_rel_error || report.checked == 1) {
                    report.max_rel_error = std::max(report.max_rel_error, err);
                    report.worst_input = k;
                    report.worst_element = i;
                    report.analytic = a;
                    report.numeric = numeric;
                }
            }
        }
        return report;
    }

} // namespace gssc
