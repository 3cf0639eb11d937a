/* SPDX-FileCopyrightText: 2026 GaussianSSC Authors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include "gssc/geometry.hpp"
#include "gssc/nn.hpp"
#include "gssc/triplane.hpp"

#include <cstdint>
#include <vector>

namespace gssc::anchor {

    using geom::VoxelGridSpec;

    inline constexpr double kSigmaLo = 0.3;
    inline constexpr double kSigmaHi = 4.0;
    inline constexpr int kWindowRadius = 2;

    /// Image feature pyramid for one frame. levels[l] is [H_l x W_l x C];
    /// strides[l] is pixels per texel of that level.
    struct FeaturePyramid {
        std::vector<NdBuffer> levels;
        std::vector<double> strides;
    };

    /// Single feature map at the resolution of level 0.
    struct FusedFeatureMap {
        Var features;  // [H x W x C]
        double stride = 1.0;
    };

    /// Resamples every level bilinearly onto the level-0 texel grid and mixes
    /// them with softmax(level_weights). Throws ConfigError on an empty pyramid.
    FusedFeatureMap fuse_levels(const FeaturePyramid& pyramid, Var level_weights);

    /// Per-voxel image-plane Gaussians, one row per voxel.
    struct AnchorField {
        Var delta;  // [N x 2] texel offsets (u, v)
        Var sigma;  // [N x 2] texel scales, within the clamp band
        Var alpha;  // [N] opacity in (0, 1)
    };

    struct AnchorDecoder {
        Linear head;  // d -> 5: delta(2), raw sigma(2), raw alpha(1)
        double sigma_lo = kSigmaLo;
        double sigma_hi = kSigmaHi;
    };

    AnchorDecoder make_anchor_decoder(ParamStore& store, const std::string& name, std::size_t width, Rng& rng);
    AnchorField decode_anchor(Graph& g, const AnchorDecoder& dec, Var descriptors);

    /// Window texel offsets (du, dv) in row-major (dv, du) order for radius r.
    std::vector<std::array<int, 2>> window_offsets(int radius);

    /// Normalized Gaussian weights on the (2r+1)^2 texel centres around
    /// round(mu), [N x (2r+1)^2]. mu is [N x 2] as (u, v).
    Var anchor_weights(Var mu, Var sigma, Var alpha, int radius = kWindowRadius);

    /// Weighted window read of fmap [H x W x C] at mu; reads are edge-clamped. [N x C]
    Var anchor_aggregate(Var fmap, Var mu, Var sigma, Var alpha, int radius = kWindowRadius);

    /// Gated residual fusion; mask [N] is 1 for voxels with image evidence.
    struct GateParams {
        Linear proj;  // C -> d
        Linear gate;  // 2d -> d
    };

    GateParams make_gate(ParamStore& store, const std::string& name, std::size_t feature_channels, std::size_t width,
                         Rng& rng);
    /// h = f + mask * sigmoid(gate([f; proj(g)])) * proj(g)
    Var gated_fuse(Graph& g, Var f, Var anchor, Var mask, const GateParams& params);
    Var gate_values(Graph& g, Var f, Var anchor, const GateParams& params);

    /// Two residual 3x3x3 blocks (dilation 1 then 2) over a narrow projection of
    /// the input field, followed by a 2-logit projection.
    struct OccHeadParams {
        Linear in;                            // d -> c
        std::array<ParamId, 2> conv_weight;   // [27c x c]
        std::array<ParamId, 2> conv_bias;     // [c]
        Linear out;                           // c -> 2
    };

    OccHeadParams make_occ_head(ParamStore& store, const std::string& name, std::size_t width, std::size_t hidden,
                                Rng& rng);
    /// field [X*Y*Z x d] in voxel linear order -> logits [X*Y*Z x 2].
    Var occupancy_head(Graph& g, Var field, const VoxelGridSpec& grid, const OccHeadParams& params);
    /// Edge-clamped 3x3x3 neighbourhood of every voxel at the given dilation, 27 entries per voxel.
    std::vector<std::int32_t> voxel_neighbours(const VoxelGridSpec& grid, int dilation);
    /// Edge-clamped 3x3x3 convolution over a [N x c] voxel field.
    Var conv3d(Var field, Var weight, Var bias, const VoxelGridSpec& grid, int dilation);

    /// Projection of every voxel centre into the fused feature map.
    struct VoxelProjection {
        std::vector<std::uint8_t> in_view;   // per voxel
        std::vector<std::int32_t> rows;      // voxel ids that are in view, ascending
        NdBuffer coords;                     // [rows x 2] fused-map coordinates (u', v')
    };

    /// u' = u / stride - 0.5, so texel centres land on integer coordinates.
    VoxelProjection project_grid(const VoxelGridSpec& grid, const geom::CameraIntrinsics& intr,
                                 const geom::CameraPose& pose, double stride);

    enum class AnchorMode { Gaussian, Point };

    struct Stage1Config {
        VoxelGridSpec grid;
        std::size_t width = 32;         // d
        std::size_t feature_width = 8;  // query feature width
        std::size_t embed_width = 16;   // d_e
        std::size_t head_width = 8;
        std::size_t image_channels = 8;
        std::size_t levels = 3;
        int window_radius = kWindowRadius;
        double sigma_lo = kSigmaLo;
        double sigma_hi = kSigmaHi;
        AnchorMode mode = AnchorMode::Gaussian;
    };

    struct Stage1Params {
        triplane::AxisEmbeddings emb;
        triplane::ScatterParams scatter;
        std::array<triplane::PlaneRefineParams, 3> refine;
        triplane::MergeParams merge;
        ParamId level_weights;
        AnchorDecoder decoder;
        GateParams gate;
        OccHeadParams head;
    };

    Stage1Params make_stage1(ParamStore& store, const Stage1Config& cfg, Rng& rng);

    /// Per-frame inputs to Stage 1.
    struct Stage1Input {
        FeaturePyramid pyramid;
        VoxelProjection projection;
        std::vector<geom::VoxelIndex> query_idx;
        NdBuffer query_features;  // [Q x F]
    };

    struct Stage1Output {
        triplane::TriplaneSet planes;
        Var descriptors;  // f, [N x d]
        Var fused;        // h, [N x d]
        Var logits;       // [N x 2]
        Var probs;        // softmax(logits)
        AnchorField anchors;  // in-view voxels only (invalid in point mode)
        FusedFeatureMap fmap;
    };

    Stage1Output stage1_forward(Graph& g, const Stage1Config& cfg, const Stage1Params& params, const Stage1Input& in);

} // namespace gssc::anchor
