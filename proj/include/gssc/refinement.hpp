/* SPDX-FileCopyrightText: 2026 GaussianSSC Authors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include "gssc/anchoring.hpp"
#include "gssc/geometry.hpp"
#include "gssc/nn.hpp"
#include "gssc/triplane.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace gssc::refine {

    using geom::VoxelGridSpec;

    inline constexpr int kMaxRadius = 6;
    inline constexpr double kCoverageEps = 1e-12;

    /// Window radius for extents theta: min(ceil(3 max(theta)), r_max).
    int window_radius(double theta_a, double theta_b, int r_max = kMaxRadius);

    /// e_v * M_v; mask has one entry per token row. Throws DimensionError on a length mismatch.
    Var occupancy_gate(Var tokens, const std::vector<std::uint8_t>& mask);

    /// Per-voxel token embeddings e_v = t_x[x] + t_y[y] + t_z[z].
    struct TokenParams {
        std::array<ParamId, 3> axis;  // [X x D], [Y x D], [Z x D]
        std::size_t width = 0;
    };

    TokenParams make_tokens(ParamStore& store, const std::string& name, const VoxelGridSpec& grid, std::size_t width,
                            Rng& rng);
    Var voxel_tokens(Graph& g, const TokenParams& params, const VoxelGridSpec& grid);

    /// Active, in-view tokens attend to the fused map at their projected centre
    /// and add the result; every other row is passed through unchanged.
    Var condition_tokens(Graph& g, Var gated, const std::vector<std::uint8_t>& mask,
                         const anchor::VoxelProjection& projection, Var fmap,
                         const triplane::DeformAttnParams& attn);

    /// Per-voxel plane Gaussians, rows in voxel order.
    struct PlaneGaussianField {
        std::array<Var, 3> theta;  // [N x 2] per plane, within the clamp band
        Var alpha;                 // [N] in (0, 1)
    };

    struct PlaneGaussianDecoder {
        Linear head;  // d -> 7
        double sigma_lo = anchor::kSigmaLo;
        double sigma_hi = anchor::kSigmaHi;
    };

    PlaneGaussianDecoder make_plane_decoder(ParamStore& store, const std::string& name, std::size_t width, Rng& rng);
    PlaneGaussianField decode_plane_gaussians(Graph& g, const PlaneGaussianDecoder& dec, Var geometry);

    /// Mean of per-voxel rows over each plane cell's fiber: [N x c] -> [cells x c].
    Var fiber_mean(Var per_voxel, const VoxelGridSpec& grid, triplane::PlaneKind kind);

    /// Target-centric normalized Gaussian smoothing. plane [A x B x d],
    /// theta [A*B x 2] as extents along (rows, cols).
    Var local_gather(Var plane, Var theta, int r_max = kMaxRadius);

    /// Source-centric opacity-weighted Gaussian splatting normalized per target.
    /// Cells no source reaches (denominator <= eps) keep their plane value.
    Var global_aggregate(Var plane, Var theta, Var alpha, int r_max = kMaxRadius);

    /// beta * gather + (1 - beta) * agg. Throws ConfigError unless 0 <= beta <= 1.
    Var blend(Var gather, Var agg, double beta);

    Var lift_merge(Graph& g, const triplane::TriplaneSet& tri, const triplane::MergeParams& merge,
                   const std::vector<geom::VoxelIndex>& voxels);

    Var semantic_head(Graph& g, Var field, const Linear& head);

    /// Fused-map reference points for every plane cell: the cell's 3D point with
    /// the missing axis at the middle of the grid, projected like a voxel centre.
    std::array<anchor::VoxelProjection, 3> project_planes(const VoxelGridSpec& grid, const geom::CameraIntrinsics& intr,
                                                          const geom::CameraPose& pose, double stride);

    struct Stage2Config {
        VoxelGridSpec grid;
        std::size_t token_width = 16;  // D_tok
        std::size_t width = 32;        // d
        std::size_t embed_width = 16;  // d_e
        std::size_t image_channels = 8;
        std::size_t levels = 3;
        std::size_t num_classes = 4;
        int points = 4;  // K
        double beta = 0.5;
        int r_max = kMaxRadius;
        double sigma_lo = anchor::kSigmaLo;
        double sigma_hi = anchor::kSigmaHi;
    };

    struct PlaneBlockParams {
        triplane::DeformAttnParams self_attn;
        triplane::DeformAttnParams cross_attn;
    };

    struct Stage2Params {
        TokenParams tokens;
        ParamId level_weights;
        triplane::DeformAttnParams condition;
        triplane::AxisEmbeddings emb;
        triplane::ScatterParams scatter;
        std::array<PlaneBlockParams, 3> planes;
        triplane::MergeParams geometry_merge;
        PlaneGaussianDecoder decoder;
        triplane::MergeParams lift;
        Linear head;
    };

    Stage2Params make_stage2(ParamStore& store, const Stage2Config& cfg, Rng& rng);

    struct Stage2Input {
        anchor::FeaturePyramid pyramid;
        anchor::VoxelProjection projection;
        std::array<anchor::VoxelProjection, 3> plane_projection;
        std::vector<std::uint8_t> occupancy;  // M_v per voxel
    };

    struct Stage2Output {
        Var tokens;       // e'_v
        triplane::TriplaneSet planes;   // image-conditioned planes
        triplane::TriplaneSet refined;  // after gather/aggregate/blend
        Var geometry;     // g_v^G
        PlaneGaussianField gaussians;
        Var features;     // h_v
        Var logits;       // [N x C]
    };

    Stage2Output stage2_forward(Graph& g, const Stage2Config& cfg, const Stage2Params& params, const Stage2Input& in);

    /// Per-voxel argmax of the semantic logits; voxels outside the occupancy mask are empty (label 0).
    std::vector<std::uint8_t> predict_labels(const NdBuffer& logits, const std::vector<std::uint8_t>& occupancy);

} // namespace gssc::refine
