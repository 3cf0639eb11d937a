/* SPDX-FileCopyrightText: 2026 GaussianSSC Authors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#include "gssc/error.hpp"
#include "gssc/geometry.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace gssc;
using namespace gssc::geom;

TEST(VoxelCenter, HalfCellOffset) {
    VoxelGridSpec g;
    auto c = voxel_center(g, {0, 0, 0});
    EXPECT_NEAR(c[0], 0.1, 1e-12);
    EXPECT_NEAR(c[1], 0.1, 1e-12);
    EXPECT_NEAR(c[2], 0.1, 1e-12);
}

TEST(VoxelCenter, FarCornerOfDefaultGrid) {
    auto c = voxel_center(VoxelGridSpec::full_scale(), {255, 255, 31});
    EXPECT_NEAR(c[0], 51.1, 1e-9);
    EXPECT_NEAR(c[1], 51.1, 1e-9);
    EXPECT_NEAR(c[2], 6.3, 1e-9);
}

TEST(VoxelCenter, ShiftedOrigin) {
    VoxelGridSpec g{{-1, -1, 0}, {4, 4, 4}, 1.0};
    auto c = voxel_center(g, {1, 1, 0});
    EXPECT_DOUBLE_EQ(c[0], 0.5);
    EXPECT_DOUBLE_EQ(c[1], 0.5);
    EXPECT_DOUBLE_EQ(c[2], 0.5);
}

TEST(VoxelCenter, OutOfRangeThrows) {
    VoxelGridSpec g;
    EXPECT_THROW(voxel_center(g, {256, 0, 0}), IndexError);
    EXPECT_THROW(voxel_center(g, {0, -1, 0}), IndexError);
}

TEST(DefaultGrid, ExtentIsExact) {
    const auto e = VoxelGridSpec::full_scale().extent();
    EXPECT_EQ(e[0], 51.2);
    EXPECT_EQ(e[1], 51.2);
    EXPECT_EQ(e[2], 6.4);
}

TEST(Project, OpticalAxis) {
    CameraIntrinsics k{100, 100, 50, 40, 100, 80};
    auto p = project({0, 0, 1}, k, CameraPose{});
    ASSERT_TRUE(p);
    EXPECT_DOUBLE_EQ(p->u, 50);
    EXPECT_DOUBLE_EQ(p->v, 40);
    EXPECT_DOUBLE_EQ(p->depth, 1);
}

TEST(Project, DirectFormula) {
    CameraIntrinsics k{100, 100, 50, 40, 100, 80};
    auto p = project({1, 2, 5}, k, CameraPose{});
    ASSERT_TRUE(p);
    EXPECT_DOUBLE_EQ(p->u, 70);
    EXPECT_DOUBLE_EQ(p->v, 80);
    EXPECT_DOUBLE_EQ(p->depth, 5);
}

TEST(Project, BehindCamera) {
    CameraIntrinsics k{100, 100, 50, 40, 100, 80};
    EXPECT_FALSE(project({0, 0, -1}, k, CameraPose{}));
    EXPECT_FALSE(project({0, 0, 1e-7}, k, CameraPose{}));
}

TEST(Project, ScaleCovariant) {
    CameraIntrinsics k{120, 95, 60, 45, 128, 96};
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> xy(-2, 2), z(0.5, 10), lam(0.01, 100);
    for (int i = 0; i < 200; ++i) {
        const Vec3 q{xy(rng), xy(rng), z(rng)};
        const double l = lam(rng);
        auto a = project(q, k, CameraPose{});
        auto b = project({l * q[0], l * q[1], l * q[2]}, k, CameraPose{});
        ASSERT_TRUE(a && b);
        EXPECT_NEAR(a->u, b->u, 1e-9);
        EXPECT_NEAR(a->v, b->v, 1e-9);
        EXPECT_NEAR(b->depth, l * a->depth, 1e-9 * b->depth);
    }
}

TEST(InImage, Bounds) {
    CameraIntrinsics k{700, 700, 613, 185, 1226, 370};
    EXPECT_TRUE(in_image(0, 0, k));
    EXPECT_FALSE(in_image(1226, 0, k));
    EXPECT_FALSE(in_image(-0.5, 10, k));
    EXPECT_TRUE(in_image(1225.99, 369.99, k));
}

TEST(Voxelize, CentresFacesAndFloor) {
    VoxelGridSpec g;
    auto c = voxel_center(g, {7, 9, 3});
    auto v = voxelize(g, c);
    ASSERT_TRUE(v);
    EXPECT_EQ(*v, (VoxelIndex{7, 9, 3}));
    EXPECT_FALSE(voxelize(g, {51.2, 10, 1}));
    EXPECT_FALSE(voxelize(g, {10, 10, 6.4}));
    EXPECT_FALSE(voxelize(g, {-1e-12, 10, 1}));
    auto f = voxelize(g, {0.39, 0.0, 0.0});
    ASSERT_TRUE(f);
    EXPECT_EQ(*f, (VoxelIndex{1, 0, 0}));
}

TEST(Voxelize, RoundTripOnRandomIndices) {
    VoxelGridSpec g;
    g.origin = {-25.6, -3.0, -1.7};
    std::mt19937_64 rng(1);
    for (int i = 0; i < 1000; ++i) {
        VoxelIndex idx{static_cast<int>(rng() % 256), static_cast<int>(rng() % 256), static_cast<int>(rng() % 32)};
        auto back = voxelize(g, voxel_center(g, idx));
        ASSERT_TRUE(back);
        EXPECT_EQ(*back, idx);
    }
}

TEST(Grid, LinearUnravelRoundTrip) {
    VoxelGridSpec g{{0, 0, 0}, {5, 7, 3}, 0.2};
    for (std::size_t i = 0; i < g.voxel_count(); ++i)
        EXPECT_EQ(g.linear(g.unravel(i)), i);
}

TEST(Validation, RejectsBadCameraAndGrid) {
    EXPECT_THROW((CameraIntrinsics{0, 1, 0, 0, 1, 1}).validate(), ConfigError);
    EXPECT_THROW((CameraIntrinsics{1, 1, 0, 0, 0, 1}).validate(), ConfigError);
    CameraPose bad;
    bad.rotation[0][0] = -1.0;  // reflection, det -1
    EXPECT_THROW(bad.validate(), ConfigError);
    bad.rotation[0][0] = 1.1;
    EXPECT_THROW(bad.validate(), ConfigError);
    EXPECT_THROW((VoxelGridSpec{{0, 0, 0}, {1, 1, 1}, 0.0}).validate(), ConfigError);
    EXPECT_THROW((VoxelGridSpec{{0, 0, 0}, {1, 0, 1}, 0.2}).validate(), ConfigError);
}

TEST(LookAt, ProducesValidPoseFacingTarget) {
    auto pose = CameraPose::look_at({6.4, -3, 8}, {6.4, 7, 0});
    EXPECT_NO_THROW(pose.validate());
    auto q = pose.to_camera({6.4, 7, 0});
    EXPECT_NEAR(q[0], 0.0, 1e-12);
    EXPECT_NEAR(q[1], 0.0, 1e-12);
    EXPECT_GT(q[2], 0.0);
    auto c = pose.camera_center();
    EXPECT_NEAR(c[0], 6.4, 1e-12);
    EXPECT_NEAR(c[1], -3.0, 1e-12);
    EXPECT_NEAR(c[2], 8.0, 1e-12);
}

TEST(SemanticVolume, LabelsDriveOccupancy) {
    SemanticVolume vol(VoxelGridSpec{{0, 0, 0}, {2, 2, 2}, 1.0}, 4);
    vol.set_label(3, 2);
    EXPECT_EQ(vol.occupancy[3], 1);
    vol.set_label(3, kEmptyLabel);
    EXPECT_EQ(vol.occupancy[3], 0);
    vol.set_label(5, kUnknownLabel);
    EXPECT_FALSE(vol.known(5));
    EXPECT_NO_THROW(vol.validate());
    vol.labels[1] = 7;
    EXPECT_THROW(vol.validate(), ConfigError);
    EXPECT_THROW(SemanticVolume(VoxelGridSpec{}, 1), ConfigError);
}
