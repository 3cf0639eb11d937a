/* SPDX-FileCopyrightText: 2026 GaussianSSC Authors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include "gssc/anchoring.hpp"
#include "gssc/geometry.hpp"
#include "gssc/triplane.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace gssc::synth {

    using geom::SemanticVolume;
    using geom::VoxelGridSpec;
    using geom::VoxelIndex;

    enum class Shape { Ground, Box, Pillar };

    struct Primitive {
        Shape shape = Shape::Box;
        VoxelIndex lo;                  // min corner
        std::array<int, 3> size{1, 1, 1};  // extents in voxels
        std::uint8_t label = 1;
    };

    struct SceneSpec {
        std::uint64_t seed = 0;
        VoxelGridSpec grid;
        std::vector<Primitive> primitives;
        int num_classes = 4;
    };

    inline constexpr std::uint8_t kGroundClass = 1;
    inline constexpr std::uint8_t kBoxClass = 2;
    inline constexpr std::uint8_t kPillarClass = 3;

    /// 64 x 64 x 8 at 0.2 m.
    VoxelGridSpec desk_grid();

    /// Ground layer, then a few boxes and pillars at seeded positions and sizes.
    SceneSpec random_scene(std::uint64_t seed, const VoxelGridSpec& grid, int num_classes = 4);

    /// Rasterizes primitives in order (later ones overwrite). Throws ConfigError
    /// for a primitive outside the grid or a label outside 1..C-1.
    SemanticVolume generate_scene(const SceneSpec& spec);

    struct Camera {
        geom::CameraIntrinsics intr;
        geom::CameraPose pose;
    };

    /// 512 x 384 pinhole with a 300 px focal length.
    geom::CameraIntrinsics desk_intrinsics();

    /// Pinhole above the near edge of the grid looking across it.
    Camera desk_camera(const VoxelGridSpec& grid, const geom::CameraIntrinsics& intr = desk_intrinsics());

    struct Hit {
        std::size_t voxel = 0;
        double depth = 0.0;  // camera-frame z at the entry point
    };

    /// First occupied voxel along the ray through pixel (u, v), if any.
    std::optional<Hit> cast_ray(const SemanticVolume& volume, const Camera& cam, double u, double v);

    struct RenderConfig {
        std::size_t channels = 8;  // class code channels plus one inverse-depth channel
        std::vector<double> strides{4.0, 8.0, 16.0};
        double noise = 0.05;
        double ref_depth = 10.0;  // inverse depth is encoded as ref_depth / depth
    };

    /// Orthonormal code of a class: e_label in the first channels - 1 entries.
    /// Background (no hit) uses the empty-class code e_0.
    std::vector<double> class_code(std::uint8_t label, std::size_t channels);

    /// Level 0 is ray-cast at texel centres, coarser levels are 2x2 means of the
    /// previous one; seeded Gaussian noise is added to every level.
    anchor::FeaturePyramid render_features(const SemanticVolume& volume, const Camera& cam, const RenderConfig& cfg,
                                           std::uint64_t seed);

    /// Distinct first-hit voxels over all pixel centres, ascending.
    std::vector<std::size_t> visible_surface(const SemanticVolume& volume, const Camera& cam);

    struct QueryConfig {
        double dropout = 0.1;  // fraction of surface voxels removed
        double jitter = 0.0;   // fraction moved by a random +-1 voxel offset
    };

    /// Seed queries from the visible surface with features sampled bilinearly
    /// from level 0 at the projected (possibly jittered) voxel centre.
    std::vector<triplane::VoxelQuery> seed_queries(const SemanticVolume& volume, const Camera& cam,
                                                   const anchor::FeaturePyramid& pyramid, const QueryConfig& cfg,
                                                   std::uint64_t seed);

    struct SampleConfig {
        VoxelGridSpec grid = desk_grid();
        geom::CameraIntrinsics intr = desk_intrinsics();
        int num_classes = 4;
        RenderConfig render;
        QueryConfig queries;
    };

    struct SyntheticSample {
        SceneSpec spec;
        SemanticVolume volume;  // voxels outside the camera view are UNKNOWN
        Camera camera;
        anchor::FeaturePyramid pyramid;
        std::vector<triplane::VoxelQuery> queries;
    };

    SyntheticSample make_sample(std::uint64_t seed, const SampleConfig& cfg);

} // namespace gssc::synth
