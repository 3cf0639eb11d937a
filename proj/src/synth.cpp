/* SPDX-FileCopyrightText: 2026 GaussianSSC Authors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#include "gssc/synth.hpp"
#include "gssc/error.hpp"
#include "gssc/ops.hpp"
#include "gssc/parallel.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace gssc::synth {

    namespace {
        int uniform_int(std::mt19937_64& rng, int lo, int hi) {
            return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
        }

        double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

        geom::Vec3 ray_direction(const Camera& cam, double u, double v) {
            const geom::Vec3 c{(u - cam.intr.cx) / cam.intr.fx, (v - cam.intr.cy) / cam.intr.fy, 1.0};
            const auto& r = cam.pose.rotation;
            geom::Vec3 d{};
            for (int i = 0; i < 3; ++i)
                d[i] = r[0][i] * c[0] + r[1][i] * c[1] + r[2][i] * c[2];
            return d;
        }

        NdBuffer downsample(const NdBuffer& level) {
            const std::size_t h = std::max<std::size_t>(level.dim(0) / 2, 1), w = std::max<std::size_t>(level.dim(1) / 2, 1);
            const std::size_t c = level.dim(2);
            NdBuffer out({h, w, c});
            for (std::size_t i = 0; i < h; ++i)
                for (std::size_t j = 0; j < w; ++j)
                    for (std::size_t k = 0; k < c; ++k) {
                        double acc = 0.0;
                        int n = 0;
                        for (std::size_t di = 0; di < 2; ++di)
                            for (std::size_t dj = 0; dj < 2; ++dj) {
                                const std::size_t ii = 2 * i + di, jj = 2 * j + dj;
                                if (ii < level.dim(0) && jj < level.dim(1)) {
                                    acc += level[(ii * level.dim(1) + jj) * c + k];
                                    ++n;
                                }
                            }
                        out[(i * w + j) * c + k] = acc / n;
                    }
            return out;
        }
    } // namespace

    VoxelGridSpec desk_grid() { return VoxelGridSpec{{0, 0, 0}, {64, 64, 8}, 0.2}; }

    SceneSpec random_scene(std::uint64_t seed, const VoxelGridSpec& grid, int num_classes) {
        grid.validate();
        if (num_classes < 4)
            throw ConfigError(fmt::format("synthetic scenes use 4 classes at least (got {})", num_classes));
        SceneSpec s{seed, grid, {}, num_classes};
        std::mt19937_64 rng(seed);
        const auto [nx, ny, nz] = grid.dims;
        s.primitives.push_back({Shape::Ground, {0, 0, 0}, {nx, ny, 1}, kGroundClass});
        if (nz < 2)
            return s;
        const int lo = std::max(1, nx / 16), hi = std::max(2, nx / 8);
        const int boxes = 4 + uniform_int(rng, 0, 3);
        for (int b = 0; b < boxes; ++b) {
            const int sx = std::min(uniform_int(rng, lo, hi), nx), sy = std::min(uniform_int(rng, lo, hi), ny);
            const int sz = std::min(uniform_int(rng, 2, 3), nz - 1);
            s.primitives.push_back(
                {Shape::Box, {uniform_int(rng, 0, nx - sx), uniform_int(rng, 0, ny - sy), 1}, {sx, sy, sz}, kBoxClass});
        }
        const int pillars = 2 + uniform_int(rng, 0, 2);
        const int foot = std::max(1, nx / 32);
        for (int p = 0; p < pillars; ++p) {
            const int sz = std::max(1, nz - 1 - uniform_int(rng, 0, 1));
            s.primitives.push_back({Shape::Pillar,
                                    {uniform_int(rng, 0, nx - foot), uniform_int(rng, 0, ny - foot), 1},
                                    {foot, foot, sz},
                                    kPillarClass});
        }
        return s;
    }

    SemanticVolume generate_scene(const SceneSpec& spec) {
        SemanticVolume vol(spec.grid, spec.num_classes);
        for (std::size_t i = 0; i < spec.primitives.size(); ++i) {
            const auto& p = spec.primitives[i];
            if (p.label == geom::kEmptyLabel || p.label >= spec.num_classes)
                throw ConfigError(fmt::format("primitive {} has label {} outside 1..{}", i, p.label, spec.num_classes - 1));
            const std::array<int, 3> lo{p.lo.x, p.lo.y, p.lo.z};
            for (int a = 0; a < 3; ++a)
                if (p.size[a] < 1 || lo[a] < 0 || lo[a] + p.size[a] > spec.grid.dims[a])
                    throw ConfigError(fmt::format("primitive {} leaves the grid along axis {}", i, a));
            if (p.shape == Shape::Ground && (p.lo.z != 0 || p.size[2] != 1))
                throw ConfigError(fmt::format("ground primitive {} must be the z = 0 layer", i));
            for (int x = lo[0]; x < lo[0] + p.size[0]; ++x)
                for (int y = lo[1]; y < lo[1] + p.size[1]; ++y)
                    for (int z = lo[2]; z < lo[2] + p.size[2]; ++z)
                        vol.set_label(spec.grid.linear({x, y, z}), p.label);
        }
        return vol;
    }

    geom::CameraIntrinsics desk_intrinsics() { return {300.0, 300.0, 256.0, 192.0, 512, 384}; }

    Camera desk_camera(const VoxelGridSpec& grid, const geom::CameraIntrinsics& intr) {
        intr.validate();
        const auto e = grid.extent();
        const auto& o = grid.origin;
        Camera cam;
        cam.intr = intr;
        cam.pose = geom::CameraPose::look_at({o[0] + 0.5 * e[0], o[1] - 0.234 * e[1], o[2] + 0.625 * e[0]},
                                             {o[0] + 0.5 * e[0], o[1] + 0.547 * e[1], o[2]});
        return cam;
    }

    std::optional<Hit> cast_ray(const SemanticVolume& volume, const Camera& cam, double u, double v) {
        const auto& g = volume.grid;
        const auto origin = cam.pose.camera_center();
        const auto dir = ray_direction(cam, u, v);
        // Slab test against the grid box, in units of the camera-z depth.
        double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
        for (int a = 0; a < 3; ++a) {
            const double lo = g.origin[a], hi = g.origin[a] + g.dims[a] * g.resolution;
            if (dir[a] == 0.0) {
                if (origin[a] < lo || origin[a] >= hi)
                    return std::nullopt;
                continue;
            }
            double ta = (lo - origin[a]) / dir[a], tb = (hi - origin[a]) / dir[a];
            if (ta > tb)
                std::swap(ta, tb);
            t0 = std::max(t0, ta);
            t1 = std::min(t1, tb);
        }
        if (!(t0 < t1))
            return std::nullopt;
        std::array<int, 3> cell{}, step{};
        std::array<double, 3> next{}, delta{};
        for (int a = 0; a < 3; ++a) {
            const double p = (origin[a] + t0 * dir[a] - g.origin[a]) / g.resolution;
            cell[a] = std::clamp(static_cast<int>(std::floor(p)), 0, g.dims[a] - 1);
            if (dir[a] > 0.0) {
                step[a] = 1;
                next[a] = (g.origin[a] + (cell[a] + 1) * g.resolution - origin[a]) / dir[a];
                delta[a] = g.resolution / dir[a];
            } else if (dir[a] < 0.0) {
                step[a] = -1;
                next[a] = (g.origin[a] + cell[a] * g.resolution - origin[a]) / dir[a];
                delta[a] = -g.resolution / dir[a];
            } else {
                next[a] = delta[a] = std::numeric_limits<double>::infinity();
            }
        }
        double t = t0;
        while (true) {
            const auto idx = g.linear({cell[0], cell[1], cell[2]});
            if (volume.occupancy[idx])
                return Hit{idx, t};
            const int a = next[0] < next[1] ? (next[0] < next[2] ? 0 : 2) : (next[1] < next[2] ? 1 : 2);
            t = next[a];
            cell[a] += step[a];
            if (cell[a] < 0 || cell[a] >= g.dims[a] || t > t1)
                return std::nullopt;
            next[a] += delta[a];
        }
    }

    std::vector<double> class_code(std::uint8_t label, std::size_t channels) {
        if (channels < 2 || label >= channels - 1)
            throw ConfigError(fmt::format("class {} needs more than {} feature channels", label, channels));
        std::vector<double> code(channels, 0.0);
        code[label] = 1.0;
        return code;
    }

    anchor::FeaturePyramid render_features(const SemanticVolume& volume, const Camera& cam, const RenderConfig& cfg,
                                           std::uint64_t seed) {
        cam.intr.validate();
        cam.pose.validate();
        if (cfg.strides.empty())
            throw ConfigError("render_features needs at least one stride");
        if (static_cast<std::size_t>(volume.num_classes) + 1 > cfg.channels)
            throw ConfigError(fmt::format("{} classes need at least {} feature channels", volume.num_classes,
                                          volume.num_classes + 1));
        for (std::size_t l = 1; l < cfg.strides.size(); ++l)
            if (cfg.strides[l] != 2.0 * cfg.strides[l - 1])
                throw ConfigError("feature strides must double from level to level");
        const double s0 = cfg.strides.front();
        const auto h = static_cast<std::size_t>(std::ceil(cam.intr.height / s0));
        const auto w = static_cast<std::size_t>(std::ceil(cam.intr.width / s0));
        const std::size_t c = cfg.channels;
        NdBuffer level({h, w, c});
        parallel_for(h * w, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t t = lo; t < hi; ++t) {
                const double u = (static_cast<double>(t % w) + 0.5) * s0;
                const double v = (static_cast<double>(t / w) + 0.5) * s0;
                const auto hit = cast_ray(volume, cam, u, v);
                double* f = level.ptr() + t * c;
                if (!hit) {
                    f[geom::kEmptyLabel] = 1.0;
                    continue;
                }
                f[volume.labels[hit->voxel] == geom::kUnknownLabel ? 0 : volume.labels[hit->voxel]] = 1.0;
                f[c - 1] = cfg.ref_depth / hit->depth;
            }
        }, 64);
        anchor::FeaturePyramid out;
        out.levels.push_back(level);
        out.strides.push_back(s0);
        for (std::size_t l = 1; l < cfg.strides.size(); ++l) {
            out.levels.push_back(downsample(out.levels.back()));
            out.strides.push_back(cfg.strides[l]);
        }
        if (cfg.noise > 0.0) {
            std::mt19937_64 rng(seed);
            std::normal_distribution<double> noise(0.0, cfg.noise);
            for (auto& lv : out.levels)
                for (auto& x : lv.storage())
                    x += noise(rng);
        }
        return out;
    }

    std::vector<std::size_t> visible_surface(const SemanticVolume& volume, const Camera& cam) {
        const std::size_t w = static_cast<std::size_t>(cam.intr.width), h = static_cast<std::size_t>(cam.intr.height);
        std::vector<std::uint8_t> seen(volume.grid.voxel_count(), 0);
        std::vector<std::int64_t> hits(w * h, -1);
        parallel_for(w * h, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t p = lo; p < hi; ++p)
                if (auto hit = cast_ray(volume, cam, static_cast<double>(p % w) + 0.5, static_cast<double>(p / w) + 0.5))
                    hits[p] = static_cast<std::int64_t>(hit->voxel);
        }, 512);
        for (auto v : hits)
            if (v >= 0)
                seen[static_cast<std::size_t>(v)] = 1;
        std::vector<std::size_t> out;
        for (std::size_t v = 0; v < seen.size(); ++v)
            if (seen[v])
                out.push_back(v);
        return out;
    }

    std::vector<triplane::VoxelQuery> seed_queries(const SemanticVolume& volume, const Camera& cam,
                                                   const anchor::FeaturePyramid& pyramid, const QueryConfig& cfg,
                                                   std::uint64_t seed) {
        if (!(cfg.dropout >= 0.0 && cfg.dropout < 1.0))
            throw ConfigError(fmt::format("query dropout must lie in [0, 1) (got {})", cfg.dropout));
        if (!(cfg.jitter >= 0.0 && cfg.jitter <= 1.0))
            throw ConfigError(fmt::format("query jitter must lie in [0, 1] (got {})", cfg.jitter));
        if (pyramid.levels.empty())
            throw ConfigError("seed_queries needs a feature pyramid");
        const auto& g = volume.grid;
        std::mt19937_64 rng(seed);
        std::vector<VoxelIndex> idx;
        for (auto v : visible_surface(volume, cam)) {
            if (uniform01(rng) < cfg.dropout)
                continue;
            auto c = g.unravel(v);
            if (uniform01(rng) < cfg.jitter) {
                std::array<int, 3> off{};
                do {
                    for (auto& o : off)
                        o = uniform_int(rng, -1, 1);
                } while (off == std::array<int, 3>{0, 0, 0});
                c = {std::clamp(c.x + off[0], 0, g.dims[0] - 1), std::clamp(c.y + off[1], 0, g.dims[1] - 1),
                     std::clamp(c.z + off[2], 0, g.dims[2] - 1)};
            }
            idx.push_back(c);
        }
        std::vector<triplane::VoxelQuery> out;
        if (idx.empty())
            return out;
        const double stride = pyramid.strides.front();
        NdBuffer coords({idx.size(), 2});
        for (std::size_t i = 0; i < idx.size(); ++i) {
            const auto p = geom::project(geom::voxel_center(g, idx[i]), cam.intr, cam.pose);
            // Every voxel of the grid lies in front of the camera; clamp-read otherwise.
            coords[2 * i] = p ? p->u / stride - 0.5 : 0.0;
            coords[2 * i + 1] = p ? p->v / stride - 0.5 : 0.0;
        }
        Tape t;
        const auto features = ops::sample_bilinear(t.constant(pyramid.levels.front()), t.constant(std::move(coords))).value();
        const std::size_t c = features.cols();
        for (std::size_t i = 0; i < idx.size(); ++i)
            out.push_back({idx[i], std::vector<double>(features.ptr() + i * c, features.ptr() + (i + 1) * c)});
        return out;
    }

    SyntheticSample make_sample(std::uint64_t seed, const SampleConfig& cfg) {
        SyntheticSample s;
        s.spec = random_scene(seed, cfg.grid, cfg.num_classes);
        s.volume = generate_scene(s.spec);
        s.camera = desk_camera(cfg.grid, cfg.intr);
        s.pyramid = render_features(s.volume, s.camera, cfg.render, seed ^ 0x9e3779b97f4a7c15ULL);
        s.queries = seed_queries(s.volume, s.camera, s.pyramid, cfg.queries, seed ^ 0xc2b2ae3d27d4eb4fULL);
        for (std::size_t v = 0; v < s.volume.labels.size(); ++v) {
            const auto p = geom::project(geom::voxel_center(cfg.grid, cfg.grid.unravel(v)), s.camera.intr, s.camera.pose);
            if (!p || !geom::in_image(p->u, p->v, s.camera.intr))
                s.volume.labels[v] = geom::kUnknownLabel;
        }
        return s;
    }

} // namespace gssc::synth
