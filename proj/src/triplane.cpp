/* SPDX-FileCopyrightText: 2026 GaussianSSC Authors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#include "gssc/triplane.hpp"
#include "gssc/error.hpp"
#include "gssc/ops.hpp"

#include <fmt/format.h>

#include <algorithm>

namespace gssc::triplane {

    namespace {
        // Axes (first, second) spanned by each plane.
        constexpr std::array<std::array<int, 2>, 3> kAxes{{{0, 1}, {0, 2}, {1, 2}}};

        int axis_of(const VoxelIndex& idx, int axis) {
            return axis == 0 ? idx.x : (axis == 1 ? idx.y : idx.z);
        }

        void check_voxel(const VoxelGridSpec& grid, const VoxelIndex& idx, std::size_t i) {
            if (!grid.contains(idx))
                throw IndexError(fmt::format("voxel #{} ({}, {}, {}) outside grid {}x{}x{}", i, idx.x, idx.y, idx.z,
                                             grid.dims[0], grid.dims[1], grid.dims[2]));
        }

        // Edge-clamped 3x3 neighbourhood of every cell, 9 entries per cell in (dr, dc) row-major order.
        std::vector<std::int32_t> neighbour_table(int rows, int cols) {
            std::vector<std::int32_t> idx;
            idx.reserve(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) * 9);
            for (int r = 0; r < rows; ++r)
                for (int c = 0; c < cols; ++c)
                    for (int dr = -1; dr <= 1; ++dr)
                        for (int dc = -1; dc <= 1; ++dc) {
                            const int rr = std::clamp(r + dr, 0, rows - 1);
                            const int cc = std::clamp(c + dc, 0, cols - 1);
                            idx.push_back(rr * cols + cc);
                        }
            return idx;
        }
    } // namespace

    const char* plane_name(PlaneKind kind) {
        switch (kind) {
        case PlaneKind::HW:
            return "HW";
        case PlaneKind::HD:
            return "HD";
        case PlaneKind::WD:
            return "WD";
        }
        return "?";
    }

    std::array<int, 2> plane_extent(const VoxelGridSpec& grid, PlaneKind kind) {
        const auto& a = kAxes[static_cast<int>(kind)];
        return {grid.dims[a[0]], grid.dims[a[1]]};
    }

    std::array<int, 2> project_index(PlaneKind kind, const VoxelIndex& idx) {
        const auto& a = kAxes[static_cast<int>(kind)];
        return {axis_of(idx, a[0]), axis_of(idx, a[1])};
    }

    std::int32_t plane_cell(const VoxelGridSpec& grid, PlaneKind kind, const VoxelIndex& idx) {
        const auto ext = plane_extent(grid, kind);
        const auto ij = project_index(kind, idx);
        return ij[0] * ext[1] + ij[1];
    }

    std::size_t triplane_elements(const VoxelGridSpec& grid, std::size_t channels) {
        std::size_t n = 0;
        for (auto k : kPlanes) {
            const auto e = plane_extent(grid, k);
            n += static_cast<std::size_t>(e[0]) * static_cast<std::size_t>(e[1]);
        }
        return n * channels;
    }

    std::size_t dense_elements(const VoxelGridSpec& grid, std::size_t channels) {
        return grid.voxel_count() * channels;
    }

    AxisEmbeddings make_axis_embeddings(ParamStore& store, const std::string& name, const VoxelGridSpec& grid,
                                        std::size_t width, std::size_t code_width, Rng& rng) {
        AxisEmbeddings emb;
        emb.width = width;
        emb.code_width = code_width;
        static constexpr std::array<const char*, 3> kNames{"x", "y", "z"};
        for (int a = 0; a < 3; ++a)
            emb.axis[a] = store.add(fmt::format("{}.e_{}", name, kNames[a]),
                                    uniform_buffer({static_cast<std::size_t>(grid.dims[a]), width}, 0.5, rng));
        emb.fuse = make_mlp(store, name + ".pe", 2 * width, code_width, code_width, rng);
        return emb;
    }

    Var plane_codes(Graph& g, const AxisEmbeddings& emb, const VoxelGridSpec& grid, PlaneKind kind) {
        const auto ext = plane_extent(grid, kind);
        const auto& a = kAxes[static_cast<int>(kind)];
        std::vector<std::int32_t> ia, ib;
        ia.reserve(static_cast<std::size_t>(ext[0] * ext[1]));
        ib.reserve(ia.capacity());
        for (int i = 0; i < ext[0]; ++i)
            for (int j = 0; j < ext[1]; ++j) {
                ia.push_back(i);
                ib.push_back(j);
            }
        const Var ea = ops::gather_rows(g.param(emb.axis[a[0]]), std::move(ia));
        const Var eb = ops::gather_rows(g.param(emb.axis[a[1]]), std::move(ib));
        return apply(g, emb.fuse, ops::concat_cols({ea, eb}));
    }

    Var plane_code(Graph& g, const AxisEmbeddings& emb, const VoxelGridSpec& grid, PlaneKind kind,
                   std::array<int, 2> cell) {
        const auto ext = plane_extent(grid, kind);
        if (cell[0] < 0 || cell[0] >= ext[0] || cell[1] < 0 || cell[1] >= ext[1])
            throw IndexError(fmt::format("cell ({}, {}) outside {} plane {}x{}", cell[0], cell[1], plane_name(kind),
                                         ext[0], ext[1]));
        const auto& a = kAxes[static_cast<int>(kind)];
        const Var ea = ops::gather_rows(g.param(emb.axis[a[0]]), {cell[0]});
        const Var eb = ops::gather_rows(g.param(emb.axis[a[1]]), {cell[1]});
        return apply(g, emb.fuse, ops::concat_cols({ea, eb}));
    }

    ScatterParams make_scatter_params(ParamStore& store, const std::string& name, std::size_t feature_width,
                                      std::size_t code_width, std::size_t channels, Rng& rng) {
        ScatterParams p;
        for (auto k : kPlanes) {
            const int i = static_cast<int>(k);
            p.project[i] = make_mlp(store, fmt::format("{}.psi_{}", name, plane_name(k)), feature_width + code_width,
                                    channels, channels, rng);
            p.scale[i] = store.add(fmt::format("{}.s_{}", name, plane_name(k)), NdBuffer({1, 1}, 1.0));
        }
        return p;
    }

    TriplaneSet empty_triplane(Graph& g, const VoxelGridSpec& grid, std::size_t channels) {
        grid.validate();
        TriplaneSet tri;
        tri.grid = grid;
        tri.channels = channels;
        for (auto k : kPlanes) {
            const auto e = plane_extent(grid, k);
            const auto rows = static_cast<std::size_t>(e[0]);
            const auto cols = static_cast<std::size_t>(e[1]);
            tri.planes[static_cast<int>(k)] = g.constant(NdBuffer({rows, cols, channels}, 0.0));
            tri.counts[static_cast<int>(k)].assign(rows * cols, 0);
        }
        return tri;
    }

    TriplaneSet scatter_queries(Graph& g, const TriplaneSet& tri, const ScatterParams& params,
                                const AxisEmbeddings& emb, const std::vector<VoxelIndex>& idx, Var features) {
        for (std::size_t i = 0; i < idx.size(); ++i)
            check_voxel(tri.grid, idx[i], i);
        if (idx.empty())
            return tri;
        if (features.value().rank() != 2 || features.value().dim(0) != idx.size())
            throw DimensionError(fmt::format("scatter_queries: {} indices but features {}", idx.size(),
                                             shape_string(features.shape())));
        TriplaneSet out = tri;
        for (auto k : kPlanes) {
            const int p = static_cast<int>(k);
            std::vector<std::int32_t> cells;
            cells.reserve(idx.size());
            for (const auto& v : idx)
                cells.push_back(plane_cell(tri.grid, k, v));
            const Var codes = ops::gather_rows(plane_codes(g, emb, tri.grid, k), cells);
            Var contrib = apply(g, params.project[p], ops::concat_cols({features, codes}));
            const Var s = ops::gather_rows(g.param(params.scale[p]), std::vector<std::int32_t>(idx.size(), 0));
            contrib = ops::mul_rows(contrib, ops::reshape(s, {idx.size()}));
            const Shape shape = tri.planes[p].shape();
            const Var flat = ops::reshape(tri.planes[p], {shape[0] * shape[1], shape[2]});
            out.planes[p] = ops::reshape(ops::scatter_add_rows(flat, cells, contrib), shape);
            for (auto c : cells)
                ++out.counts[p][static_cast<std::size_t>(c)];
        }
        return out;
    }

    TriplaneSet count_normalize(const TriplaneSet& tri) {
        TriplaneSet out = tri;
        for (int p = 0; p < 3; ++p) {
            const Shape shape = tri.planes[p].shape();
            std::vector<double> inv(tri.counts[p].size());
            for (std::size_t i = 0; i < inv.size(); ++i)
                inv[i] = 1.0 / static_cast<double>(std::max(tri.counts[p][i], 1));
            const Var scale = tri.planes[p].tape->constant(NdBuffer::vector(std::move(inv)));
            const Var flat = ops::reshape(tri.planes[p], {shape[0] * shape[1], shape[2]});
            out.planes[p] = ops::reshape(ops::mul_rows(flat, scale), shape);
        }
        return out;
    }

    PlaneRefineParams make_plane_refine(ParamStore& store, const std::string& name, std::size_t channels, Rng& rng) {
        PlaneRefineParams p;
        const double bound = 0.5 * std::sqrt(6.0 / static_cast<double>(10 * channels));
        p.mix_weight = store.add(name + ".mix.weight", uniform_buffer({9 * channels, channels}, bound, rng));
        p.mix_bias = store.add(name + ".mix.bias", NdBuffer({channels}, 0.0));
        p.ffn = make_mlp(store, name + ".ffn", channels, 2 * channels, channels, rng, 0.5);
        return p;
    }

    Var refine_plane(Graph& g, Var plane, const PlaneRefineParams& params) {
        const Shape shape = plane.shape();
        if (shape.size() != 3)
            throw DimensionError(fmt::format("refine_plane expects [H x W x C], got {}", shape_string(shape)));
        const std::size_t cells = shape[0] * shape[1];
        const std::size_t c = shape[2];
        const Var flat = ops::reshape(plane, {cells, c});
        const Var window = ops::gather_rows(flat, neighbour_table(static_cast<int>(shape[0]), static_cast<int>(shape[1])));
        const Var mixed = ops::add_bias(ops::matmul(ops::reshape(window, {cells, 9 * c}), g.param(params.mix_weight)),
                                        g.param(params.mix_bias));
        const Var h = ops::add(flat, mixed);
        const Var out = ops::add(h, apply(g, params.ffn, h));
        return ops::reshape(out, shape);
    }

    DeformAttnParams make_deform_attn(ParamStore& store, const std::string& name, std::size_t query_width,
                                      std::size_t target_channels, std::size_t out_width, int points, Rng& rng) {
        if (points < 1)
            throw ConfigError(fmt::format("deformable attention needs K >= 1 (got {})", points));
        DeformAttnParams p;
        p.points = points;
        const auto k = static_cast<std::size_t>(points);
        p.offsets = make_linear(store, name + ".offsets", query_width, 2 * k, rng, 0.1);
        p.weights = make_linear(store, name + ".weights", query_width, k, rng, 0.1);
        p.proj = make_linear(store, name + ".proj", target_channels, out_width, rng);
        return p;
    }

    Var deform_attention_weights(Graph& g, Var queries, const DeformAttnParams& params) {
        return ops::softmax_rows(apply(g, params.weights, queries));
    }

    Var deform_sample_attend(Graph& g, Var queries, Var refs, Var target, const DeformAttnParams& params) {
        const std::size_t n = queries.value().rows();
        const auto k = static_cast<std::size_t>(params.points);
        if (refs.value().rank() != 2 || refs.value().dim(0) != n || refs.value().dim(1) != 2)
            throw DimensionError(fmt::format("deform_sample_attend: {} queries but refs {}", n,
                                             shape_string(refs.shape())));
        std::vector<std::int32_t> rep(n * k);
        for (std::size_t i = 0; i < n * k; ++i)
            rep[i] = static_cast<std::int32_t>(i / k);
        const Var offsets = ops::reshape(apply(g, params.offsets, queries), {n * k, 2});
        const Var coords = ops::add(ops::gather_rows(refs, std::move(rep)), offsets);
        const Var samples = ops::sample_bilinear(target, coords);
        const Var mixed = ops::group_weighted_sum(samples, deform_attention_weights(g, queries, params));
        return apply(g, params.proj, mixed);
    }

    MergeParams make_merge(ParamStore& store, const std::string& name, std::size_t channels, std::size_t hidden,
                           std::size_t out, Rng& rng) {
        MergeParams m;
        m.channels = channels;
        const double bound = std::sqrt(6.0 / static_cast<double>(3 * channels + hidden));
        for (auto k : kPlanes)
            m.plane_weight[static_cast<int>(k)] =
                store.add(fmt::format("{}.0.weight_{}", name, plane_name(k)), uniform_buffer({channels, hidden}, bound, rng));
        m.bias = store.add(name + ".0.bias", NdBuffer({hidden}, 0.0));
        m.out = make_linear(store, name + ".1", hidden, out, rng);
        return m;
    }

    Var gather_planes(const TriplaneSet& tri, const std::vector<VoxelIndex>& voxels) {
        std::vector<Var> parts;
        for (auto k : kPlanes) {
            const int p = static_cast<int>(k);
            std::vector<std::int32_t> cells;
            cells.reserve(voxels.size());
            for (std::size_t i = 0; i < voxels.size(); ++i) {
                check_voxel(tri.grid, voxels[i], i);
                cells.push_back(plane_cell(tri.grid, k, voxels[i]));
            }
            const Shape shape = tri.planes[p].shape();
            parts.push_back(ops::gather_rows(ops::reshape(tri.planes[p], {shape[0] * shape[1], shape[2]}), cells));
        }
        return ops::concat_cols(parts);
    }

    Var gather_merge(Graph& g, const TriplaneSet& tri, const MergeParams& merge,
                     const std::vector<VoxelIndex>& voxels) {
        if (voxels.empty())
            throw DimensionError("gather_merge needs at least one voxel");
        // [P_HW; P_HD; P_WD] W = sum_P P W_P, so each plane is projected once per
        // cell and the products are gathered per voxel.
        Var pre;
        for (auto k : kPlanes) {
            const int p = static_cast<int>(k);
            std::vector<std::int32_t> cells;
            cells.reserve(voxels.size());
            for (std::size_t i = 0; i < voxels.size(); ++i) {
                check_voxel(tri.grid, voxels[i], i);
                cells.push_back(plane_cell(tri.grid, k, voxels[i]));
            }
            const Shape shape = tri.planes[p].shape();
            const Var flat = ops::reshape(tri.planes[p], {shape[0] * shape[1], shape[2]});
            Var term;
            if (voxels.size() < shape[0] * shape[1])
                term = ops::matmul(ops::gather_rows(flat, std::move(cells)), g.param(merge.plane_weight[p]));
            else
                term = ops::gather_rows(ops::matmul(flat, g.param(merge.plane_weight[p])), std::move(cells));
            pre = pre.valid() ? ops::add(pre, term) : term;
        }
        return apply(g, merge.out, ops::silu(ops::add_bias(pre, g.param(merge.bias))));
    }

    Var gather_merge(Graph& g, const TriplaneSet& tri, const MergeParams& merge, const VoxelIndex& voxel) {
        return gather_merge(g, tri, merge, std::vector<VoxelIndex>{voxel});
    }

    std::vector<VoxelIndex> all_voxels(const VoxelGridSpec& grid) {
        std::vector<VoxelIndex> out(grid.voxel_count());
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = grid.unravel(i);
        return out;
    }

} // namespace gssc::triplane
