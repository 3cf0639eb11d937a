/* SPDX-FileCopyrightText: 2026 GaussianSSC Authors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

namespace gssc::geom {

    using Vec3 = std::array<double, 3>;
    using Mat3 = std::array<std::array<double, 3>, 3>;

    /// Minimum camera-frame depth (metres) for a point to count as in front of the camera.
    inline constexpr double kMinDepth = 1e-6;

    struct CameraIntrinsics {
        double fx = 1.0;
        double fy = 1.0;
        double cx = 0.0;
        double cy = 0.0;
        int width = 1;
        int height = 1;

        /// Throws ConfigError on non-positive focal lengths or empty image extents.
        void validate() const;
    };

    /// World-to-camera transform q = R p + t.
    struct CameraPose {
        Mat3 rotation{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
        Vec3 translation{0, 0, 0};

        /// Throws ConfigError unless R is orthonormal with det +1 (within 1e-9).
        void validate() const;
        [[nodiscard]] Vec3 to_camera(const Vec3& p) const;
        [[nodiscard]] Vec3 camera_center() const;

        /// Camera at eye looking at target; image x follows the world direction
        /// right = forward x up, image y points down.
        static CameraPose look_at(const Vec3& eye, const Vec3& target, const Vec3& up = {0, 0, 1});
    };

    struct Projection {
        double u = 0.0;
        double v = 0.0;
        double depth = 0.0;
    };

    /// Pinhole projection; nullopt when the point is behind the camera.
    std::optional<Projection> project(const Vec3& p, const CameraIntrinsics& intr, const CameraPose& pose);

    /// 0 <= u < width and 0 <= v < height.
    bool in_image(double u, double v, const CameraIntrinsics& intr);

    struct VoxelIndex {
        int x = 0;
        int y = 0;
        int z = 0;
        friend bool operator==(const VoxelIndex&, const VoxelIndex&) = default;
    };

    /// Axis-aligned region of interest split into half-open cubic cells.
    struct VoxelGridSpec {
        Vec3 origin{0, 0, 0};
        std::array<int, 3> dims{256, 256, 32};
        double resolution = 0.2;

        void validate() const;
        [[nodiscard]] std::size_t voxel_count() const;
        [[nodiscard]] Vec3 extent() const;
        [[nodiscard]] bool contains(const VoxelIndex& idx) const;
        /// Row-major (x, y, z) linear index; z varies fastest.
        [[nodiscard]] std::size_t linear(const VoxelIndex& idx) const;
        [[nodiscard]] VoxelIndex unravel(std::size_t linear) const;

        static VoxelGridSpec full_scale() { return {}; }
    };

    /// Centre of a voxel in metres. Throws IndexError outside dims.
    Vec3 voxel_center(const VoxelGridSpec& spec, const VoxelIndex& idx);

    /// Cell containing p, or nullopt outside the ROI.
    std::optional<VoxelIndex> voxelize(const VoxelGridSpec& spec, const Vec3& p);

    inline constexpr std::uint8_t kUnknownLabel = 255;
    inline constexpr std::uint8_t kEmptyLabel = 0;

    /// Ground truth over a grid. Label 0 is empty, kUnknownLabel is excluded
    /// from supervision and evaluation.
    struct SemanticVolume {
        VoxelGridSpec grid;
        int num_classes = 20;
        std::vector<std::uint8_t> occupancy;
        std::vector<std::uint8_t> labels;

        SemanticVolume() = default;
        SemanticVolume(const VoxelGridSpec& grid, int num_classes);

        [[nodiscard]] bool known(std::size_t v) const { return labels[v] != kUnknownLabel; }
        void set_label(std::size_t v, std::uint8_t label);
        /// Checks label range and that known labels agree with occupancy.
        void validate() const;
    };

} // namespace gssc::geom
