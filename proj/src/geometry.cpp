/* SPDX-FileCopyrightText: 2026 GaussianSSC Authors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#include "gssc/geometry.hpp"
#include "gssc/error.hpp"

#include <fmt/format.h>

#include <cmath>

namespace gssc::geom {

    namespace {
        Vec3 cross(const Vec3& a, const Vec3& b) {
            return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
        }
        Vec3 normalized(const Vec3& a) {
            const double n = std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
            if (n == 0.0)
                throw ConfigError("cannot normalise a zero vector");
            return {a[0] / n, a[1] / n, a[2] / n};
        }
    } // namespace

    void CameraIntrinsics::validate() const {
        if (!(fx > 0.0 && fy > 0.0))
            throw ConfigError(fmt::format("camera focal lengths must be positive (fx={}, fy={})", fx, fy));
        if (width < 1 || height < 1)
            throw ConfigError(fmt::format("camera image must be at least 1x1 (got {}x{})", width, height));
    }

    void CameraPose::validate() const {
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double dotp = 0.0;
                for (int k = 0; k < 3; ++k)
                    dotp += rotation[k][i] * rotation[k][j];
                if (std::abs(dotp - (i == j ? 1.0 : 0.0)) > 1e-9)
                    throw ConfigError("camera rotation is not orthonormal");
            }
        const auto& r = rotation;
        const double det = r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1]) -
                           r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0]) +
                           r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]);
        if (std::abs(det - 1.0) > 1e-9)
            throw ConfigError(fmt::format("camera rotation must have det +1 (got {})", det));
    }

    Vec3 CameraPose::to_camera(const Vec3& p) const {
        Vec3 q{};
        for (int i = 0; i < 3; ++i)
            q[i] = rotation[i][0] * p[0] + rotation[i][1] * p[1] + rotation[i][2] * p[2] + translation[i];
        return q;
    }

    Vec3 CameraPose::camera_center() const {
        // c = -R^T t
        Vec3 c{};
        for (int i = 0; i < 3; ++i)
            c[i] = -(rotation[0][i] * translation[0] + rotation[1][i] * translation[1] + rotation[2][i] * translation[2]);
        return c;
    }

    CameraPose CameraPose::look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
        const Vec3 forward = normalized({target[0] - eye[0], target[1] - eye[1], target[2] - eye[2]});
        const Vec3 right = normalized(cross(forward, up));
        const Vec3 down = cross(forward, right);
        CameraPose pose;
        pose.rotation = {right, down, forward};
        for (int i = 0; i < 3; ++i)
            pose.translation[i] =
                -(pose.rotation[i][0] * eye[0] + pose.rotation[i][1] * eye[1] + pose.rotation[i][2] * eye[2]);
        return pose;
    }

    std::optional<Projection> project(const Vec3& p, const CameraIntrinsics& intr, const CameraPose& pose) {
        const Vec3 q = pose.to_camera(p);
        if (q[2] <= kMinDepth)
            return std::nullopt;
        return Projection{intr.fx * q[0] / q[2] + intr.cx, intr.fy * q[1] / q[2] + intr.cy, q[2]};
    }

    bool in_image(double u, double v, const CameraIntrinsics& intr) {
        return u >= 0.0 && u < static_cast<double>(intr.width) && v >= 0.0 && v < static_cast<double>(intr.height);
    }

    void VoxelGridSpec::validate() const {
        if (!(resolution > 0.0))
            throw ConfigError(fmt::format("grid resolution must be positive (got {})", resolution));
        for (int d : dims)
            if (d < 1)
                throw ConfigError(fmt::format("grid dims must be >= 1 (got {}x{}x{})", dims[0], dims[1], dims[2]));
    }

    std::size_t VoxelGridSpec::voxel_count() const {
        return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) * static_cast<std::size_t>(dims[2]);
    }

    Vec3 VoxelGridSpec::extent() const {
        return {dims[0] * resolution, dims[1] * resolution, dims[2] * resolution};
    }

    bool VoxelGridSpec::contains(const VoxelIndex& idx) const {
        return idx.x >= 0 && idx.x < dims[0] && idx.y >= 0 && idx.y < dims[1] && idx.z >= 0 && idx.z < dims[2];
    }

    std::size_t VoxelGridSpec::linear(const VoxelIndex& idx) const {
        return (static_cast<std::size_t>(idx.x) * static_cast<std::size_t>(dims[1]) + static_cast<std::size_t>(idx.y)) *
                   static_cast<std::size_t>(dims[2]) +
               static_cast<std::size_t>(idx.z);
    }

    VoxelIndex VoxelGridSpec::unravel(std::size_t linear) const {
        const auto z = static_cast<int>(linear % static_cast<std::size_t>(dims[2]));
        linear /= static_cast<std::size_t>(dims[2]);
        const auto y = static_cast<int>(linear % static_cast<std::size_t>(dims[1]));
        const auto x = static_cast<int>(linear / static_cast<std::size_t>(dims[1]));
        return {x, y, z};
    }

    Vec3 voxel_center(const VoxelGridSpec& spec, const VoxelIndex& idx) {
        if (!spec.contains(idx))
            throw IndexError(fmt::format("voxel ({}, {}, {}) outside grid {}x{}x{}", idx.x, idx.y, idx.z,
                                         spec.dims[0], spec.dims[1], spec.dims[2]));
        return {spec.origin[0] + (idx.x + 0.5) * spec.resolution, spec.origin[1] + (idx.y + 0.5) * spec.resolution,
                spec.origin[2] + (idx.z + 0.5) * spec.resolution};
    }

    std::optional<VoxelIndex> voxelize(const VoxelGridSpec& spec, const Vec3& p) {
        std::array<int, 3> cell{};
        for (int a = 0; a < 3; ++a) {
            const double f = std::floor((p[a] - spec.origin[a]) / spec.resolution);
            if (!(f >= 0.0 && f < static_cast<double>(spec.dims[a])))
                return std::nullopt;
            cell[a] = static_cast<int>(f);
        }
        return VoxelIndex{cell[0], cell[1], cell[2]};
    }

    SemanticVolume::SemanticVolume(const VoxelGridSpec& g, int classes)
        : grid(g),
          num_classes(classes),
          occupancy(g.voxel_count(), 0),
          labels(g.voxel_count(), kEmptyLabel) {
        g.validate();
        if (classes < 2 || classes >= kUnknownLabel)
            throw ConfigError(fmt::format("num_classes must be in [2, {}), got {}", int{kUnknownLabel}, classes));
    }

    void SemanticVolume::set_label(std::size_t v, std::uint8_t label) {
        labels.at(v) = label;
        if (label != kUnknownLabel)
            occupancy[v] = label != kEmptyLabel ? 1 : 0;
    }

    void SemanticVolume::validate() const {
        if (labels.size() != grid.voxel_count() || occupancy.size() != grid.voxel_count())
            throw DimensionError("semantic volume fields do not match grid dims");
        for (std::size_t v = 0; v < labels.size(); ++v) {
            const auto l = labels[v];
            if (l == kUnknownLabel)
                continue;
            if (l >= num_classes)
                throw ConfigError(fmt::format("voxel {} has label {} >= num_classes {}", v, l, num_classes));
            if ((l != kEmptyLabel) != (occupancy[v] != 0))
                throw ConfigError(fmt::format("voxel {} label {} disagrees with occupancy", v, l));
        }
    }

} // namespace gssc::geom
