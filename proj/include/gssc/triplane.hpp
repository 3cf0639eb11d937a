/* SPDX-FileCopyrightText: 2026 GaussianSSC Authors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include "gssc/geometry.hpp"
#include "gssc/nn.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace gssc::triplane {

    using geom::VoxelGridSpec;
    using geom::VoxelIndex;

    enum class PlaneKind : int { HW = 0, HD = 1, WD = 2 };
    inline constexpr std::array<PlaneKind, 3> kPlanes{PlaneKind::HW, PlaneKind::HD, PlaneKind::WD};

    const char* plane_name(PlaneKind kind);

    /// Plane extents (rows, cols): HW = (X, Y), HD = (X, Z), WD = (Y, Z).
    std::array<int, 2> plane_extent(const VoxelGridSpec& grid, PlaneKind kind);
    /// Projection of a voxel onto a plane: HW -> (x, y), HD -> (x, z), WD -> (y, z).
    std::array<int, 2> project_index(PlaneKind kind, const VoxelIndex& idx);
    std::int32_t plane_cell(const VoxelGridSpec& grid, PlaneKind kind, const VoxelIndex& idx);

    /// Feature storage of the three planes versus a dense volume, in doubles.
    std::size_t triplane_elements(const VoxelGridSpec& grid, std::size_t channels);
    std::size_t dense_elements(const VoxelGridSpec& grid, std::size_t channels);

    /// A seed voxel with its initial feature.
    struct VoxelQuery {
        VoxelIndex idx;
        std::vector<double> feature;
    };

    /// Learned per-axis embeddings fused by a small MLP into per-plane cell codes.
    struct AxisEmbeddings {
        std::array<ParamId, 3> axis;  // [X x de], [Y x de], [Z x de]
        Mlp fuse;                     // 2*de -> code width
        std::size_t width = 0;        // embedding width de
        std::size_t code_width = 0;
    };

    AxisEmbeddings make_axis_embeddings(ParamStore& store, const std::string& name, const VoxelGridSpec& grid,
                                        std::size_t width, std::size_t code_width, Rng& rng);

    /// Codes for every cell of a plane, [rows*cols x code_width], row-major cells.
    Var plane_codes(Graph& g, const AxisEmbeddings& emb, const VoxelGridSpec& grid, PlaneKind kind);
    /// Code of a single cell as [1 x code_width]. Throws IndexError outside the plane.
    Var plane_code(Graph& g, const AxisEmbeddings& emb, const VoxelGridSpec& grid, PlaneKind kind,
                   std::array<int, 2> cell);

    struct ScatterParams {
        std::array<Mlp, 3> project;     // psi_P([feature; code]) -> d
        std::array<ParamId, 3> scale;   // s_P, [1 x 1], initialised to 1
    };

    ScatterParams make_scatter_params(ParamStore& store, const std::string& name, std::size_t feature_width,
                                      std::size_t code_width, std::size_t channels, Rng& rng);

    /// Three planes [rows x cols x d] plus the number of contributions per cell.
    struct TriplaneSet {
        VoxelGridSpec grid;
        std::size_t channels = 0;
        std::array<Var, 3> planes;
        std::array<std::vector<int>, 3> counts;

        [[nodiscard]] Var plane(PlaneKind k) const { return planes[static_cast<int>(k)]; }
    };

    TriplaneSet empty_triplane(Graph& g, const VoxelGridSpec& grid, std::size_t channels);

    /// Adds s_P * psi_P(feature_q, code_P(pi_P(x_q))) into every plane for each query.
    /// features is [N x F]; an empty index list leaves the set unchanged.
    TriplaneSet scatter_queries(Graph& g, const TriplaneSet& tri, const ScatterParams& params,
                                const AxisEmbeddings& emb, const std::vector<VoxelIndex>& idx, Var features);

    /// Divides each cell by max(count, 1); counts are kept.
    TriplaneSet count_normalize(const TriplaneSet& tri);

    /// 3x3 local mixing (edge-clamped) with a residual, then a pointwise FFN with a residual.
    struct PlaneRefineParams {
        ParamId mix_weight;  // [9d x d]
        ParamId mix_bias;    // [d]
        Mlp ffn;
    };

    PlaneRefineParams make_plane_refine(ParamStore& store, const std::string& name, std::size_t channels, Rng& rng);
    Var refine_plane(Graph& g, Var plane, const PlaneRefineParams& params);

    /// Single-head offset-sampling attention: K offsets and K softmax weights
    /// are predicted from the query, the target is read bilinearly at
    /// ref + offset_k and the weighted read is projected to the output width.
    struct DeformAttnParams {
        Linear offsets;  // d -> 2K
        Linear weights;  // d -> K
        Linear proj;     // C -> d_out
        int points = 4;
    };

    DeformAttnParams make_deform_attn(ParamStore& store, const std::string& name, std::size_t query_width,
                                      std::size_t target_channels, std::size_t out_width, int points, Rng& rng);

    /// queries [N x d], refs [N x 2] as (u, v) on target [H x W x C] -> [N x d_out].
    Var deform_sample_attend(Graph& g, Var queries, Var refs, Var target, const DeformAttnParams& params);
    /// The softmax attention weights for the queries, [N x K].
    Var deform_attention_weights(Graph& g, Var queries, const DeformAttnParams& params);

    /// Merge MLP over [P_HW; P_HD; P_WD]; the first layer is stored per plane so
    /// the per-plane products can be formed once per cell.
    struct MergeParams {
        std::array<ParamId, 3> plane_weight;  // [d x hidden] each
        ParamId bias;                         // [hidden]
        Linear out;                           // hidden -> out
        std::size_t channels = 0;
    };

    MergeParams make_merge(ParamStore& store, const std::string& name, std::size_t channels, std::size_t hidden,
                           std::size_t out, Rng& rng);

    /// Concatenated plane reads [N x 3d] at the given voxels.
    Var gather_planes(const TriplaneSet& tri, const std::vector<VoxelIndex>& voxels);
    /// merge(P_HW[x,y], P_HD[x,z], P_WD[y,z]) for each voxel, [N x out].
    Var gather_merge(Graph& g, const TriplaneSet& tri, const MergeParams& merge, const std::vector<VoxelIndex>& voxels);
    Var gather_merge(Graph& g, const TriplaneSet& tri, const MergeParams& merge, const VoxelIndex& voxel);

    /// All voxels of a grid in linear order.
    std::vector<VoxelIndex> all_voxels(const VoxelGridSpec& grid);

} // namespace gssc::triplane
