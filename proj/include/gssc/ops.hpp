/* SPDX-FileCopyrightText: 2026 GaussianSSC Authors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include "gssc/tape.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <vector>

/// Differentiable kernels. Every function computes its forward value eagerly
/// and records the matching vector-Jacobian product on the input's tape.
/// Matrices are row-major; "rows" of a rank-n buffer are its leading extents
/// flattened, with the last extent as channels.
namespace gssc::ops {

    Var matmul(Var a, Var b);

    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var scale(Var a, double factor);
    Var add_scalar(Var a, double offset);

    /// x[..., C] + bias[C]
    Var add_bias(Var x, Var bias);
    /// x[N x C] * s[N] row-wise
    Var mul_rows(Var x, Var row_scale);

    Var concat_cols(const std::vector<Var>& parts);
    Var slice_cols(Var x, std::size_t begin, std::size_t count);
    Var reshape(Var x, Shape shape);

    Var sum(Var x);
    Var mean(Var x);
    /// sum(x * weights) for a constant weight buffer of the same shape.
    Var dot(Var x, const NdBuffer& weights);

    Var sigmoid(Var x);
    Var silu(Var x);
    Var exp(Var x);
    Var log(Var x);
    Var abs(Var x);
    Var square(Var x);

    /// Elementwise log(1 + e^x) clipped to [lo, hi]. Zero gradient outside the band.
    /// Throws ConfigError unless 0 < lo < hi.
    Var softplus_clamped(Var x, double lo, double hi);
    double softplus_clamped(double x, double lo, double hi);

    Var softmax_rows(Var x);
    Var log_softmax_rows(Var x);

    /// out[i, :] = x[idx[i], :]. Backward accumulates in input order.
    Var gather_rows(Var x, std::vector<std::int32_t> idx);

    /// out = target; out[rows[i], :] += values[i, :]. Contributions landing on
    /// the same row are summed in ascending value order per channel before being
    /// added to the target, so the result is bit-identical under any permutation
    /// of the entries.
    Var scatter_add_rows(Var target, std::vector<std::int32_t> rows, Var values);

    using Cell = std::array<std::int32_t, 2>;
    /// target[H x W x C]; cells are (row, col). Throws IndexError on a bad cell.
    Var scatter_add(Var target, std::span<const Cell> cells, Var values);

    /// Bilinear read of plane[H x W x C] at coords[N x 2] holding (u, v), where u
    /// runs along W and v along H and texel centres sit on integer coordinates.
    /// Coordinates are clamped to the plane, so reads outside return edge texels.
    Var sample_bilinear(Var plane, Var coords);

    /// out[n, :] = sum_k weights[n, k] * values[n*K + k, :]
    Var group_weighted_sum(Var values, Var weights);

    /// sum_l weights[l] * levels[l] over constant buffers of identical shape.
    Var weighted_sum(const std::vector<NdBuffer>& levels, Var weights);

} // namespace gssc::ops
