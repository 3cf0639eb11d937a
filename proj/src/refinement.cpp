/* SPDX-FileCopyrightText: 2026 GaussianSSC Authors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#include "gssc/refinement.hpp"
#include "gssc/error.hpp"
#include "gssc/ops.hpp"
#include "gssc/parallel.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace gssc::refine {

    using triplane::PlaneKind;

    namespace {
        struct PlaneShape {
            int rows = 0;
            int cols = 0;
            std::size_t channels = 0;
            [[nodiscard]] std::size_t cells() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
        };

        PlaneShape check_plane(const char* op, Var plane, Var theta) {
            const auto& s = plane.shape();
            if (s.size() != 3)
                throw DimensionError(fmt::format("{}: plane must be [A x B x d], got {}", op, shape_string(s)));
            PlaneShape p{static_cast<int>(s[0]), static_cast<int>(s[1]), s[2]};
            const auto& t = theta.shape();
            if (t.size() != 2 || t[0] != p.cells() || t[1] != 2)
                throw DimensionError(fmt::format("{}: theta {} does not match plane {}", op, shape_string(t), shape_string(s)));
            const double* th = theta.value().ptr();
            for (std::size_t i = 0; i < 2 * p.cells(); ++i)
                if (!(th[i] > 0.0))
                    throw NumericError(fmt::format("{}: theta of cell {} must be positive", op, i / 2));
            return p;
        }

        std::vector<int> radii(const double* theta, std::size_t cells, int r_max) {
            std::vector<int> r(cells);
            for (std::size_t i = 0; i < cells; ++i)
                r[i] = window_radius(theta[2 * i], theta[2 * i + 1], r_max);
            return r;
        }

        double log_kernel(int da, int db, double ta, double tb) {
            const double qa = da / ta;
            const double qb = db / tb;
            return -0.5 * (qa * qa + qb * qb);
        }
    } // namespace

    int window_radius(double theta_a, double theta_b, int r_max) {
        const double r = std::ceil(3.0 * std::max(theta_a, theta_b));
        return static_cast<int>(std::min(r, static_cast<double>(r_max)));
    }

    Var occupancy_gate(Var tokens, const std::vector<std::uint8_t>& mask) {
        if (tokens.value().rank() != 2 || tokens.value().rows() != mask.size())
            throw DimensionError(fmt::format("occupancy_gate: tokens {} but mask of {}", shape_string(tokens.shape()),
                                             mask.size()));
        std::vector<double> m(mask.size());
        for (std::size_t i = 0; i < m.size(); ++i)
            m[i] = mask[i] ? 1.0 : 0.0;
        return ops::mul_rows(tokens, tokens.tape->constant(NdBuffer::vector(std::move(m))));
    }

    TokenParams make_tokens(ParamStore& store, const std::string& name, const VoxelGridSpec& grid, std::size_t width,
                            Rng& rng) {
        TokenParams p;
        p.width = width;
        const char* axes[3] = {"x", "y", "z"};
        for (int a = 0; a < 3; ++a)
            p.axis[a] = store.add(fmt::format("{}.{}", name, axes[a]),
                                  uniform_buffer({static_cast<std::size_t>(grid.dims[a]), width}, 0.5, rng));
        return p;
    }

    Var voxel_tokens(Graph& g, const TokenParams& params, const VoxelGridSpec& grid) {
        const std::size_t n = grid.voxel_count();
        std::array<std::vector<std::int32_t>, 3> idx;
        for (auto& v : idx)
            v.resize(n);
        for (std::size_t v = 0; v < n; ++v) {
            const auto c = grid.unravel(v);
            idx[0][v] = c.x;
            idx[1][v] = c.y;
            idx[2][v] = c.z;
        }
        Var e = ops::gather_rows(g.param(params.axis[0]), std::move(idx[0]));
        e = ops::add(e, ops::gather_rows(g.param(params.axis[1]), std::move(idx[1])));
        return ops::add(e, ops::gather_rows(g.param(params.axis[2]), std::move(idx[2])));
    }

    Var condition_tokens(Graph& g, Var gated, const std::vector<std::uint8_t>& mask,
                         const anchor::VoxelProjection& projection, Var fmap, const triplane::DeformAttnParams& attn) {
        const std::size_t n = gated.value().rows();
        if (mask.size() != n || projection.in_view.size() != n)
            throw DimensionError(fmt::format("condition_tokens: {} tokens, mask {}, projection {}", n, mask.size(),
                                             projection.in_view.size()));
        std::vector<std::int32_t> rows;
        std::vector<std::int32_t> ref_rows;
        for (std::size_t i = 0; i < projection.rows.size(); ++i) {
            const auto v = projection.rows[i];
            if (mask[static_cast<std::size_t>(v)]) {
                rows.push_back(v);
                ref_rows.push_back(static_cast<std::int32_t>(i));
            }
        }
        if (rows.empty())
            return gated;
        const Var refs = ops::gather_rows(g.constant(projection.coords), std::move(ref_rows));
        const Var q = ops::gather_rows(gated, rows);
        return ops::scatter_add_rows(gated, rows, triplane::deform_sample_attend(g, q, refs, fmap, attn));
    }

    PlaneGaussianDecoder make_plane_decoder(ParamStore& store, const std::string& name, std::size_t width, Rng& rng) {
        PlaneGaussianDecoder dec;
        dec.head = make_linear(store, name, width, 7, rng, 0.1);
        return dec;
    }

    PlaneGaussianField decode_plane_gaussians(Graph& g, const PlaneGaussianDecoder& dec, Var geometry) {
        const Var raw = apply(g, dec.head, geometry);
        PlaneGaussianField f;
        for (int p = 0; p < 3; ++p)
            f.theta[p] = ops::softplus_clamped(ops::slice_cols(raw, 2 * p, 2), dec.sigma_lo, dec.sigma_hi);
        f.alpha = ops::reshape(ops::sigmoid(ops::slice_cols(raw, 6, 1)), {raw.value().rows()});
        return f;
    }

    Var fiber_mean(Var per_voxel, const VoxelGridSpec& grid, PlaneKind kind) {
        const std::size_t n = grid.voxel_count();
        if (per_voxel.value().rank() != 2 || per_voxel.value().rows() != n)
            throw DimensionError(fmt::format("fiber_mean: {} rows for {} voxels", per_voxel.value().rows(), n));
        const auto ext = triplane::plane_extent(grid, kind);
        const std::size_t cells = static_cast<std::size_t>(ext[0]) * static_cast<std::size_t>(ext[1]);
        std::vector<std::int32_t> cell(n);
        for (std::size_t v = 0; v < n; ++v)
            cell[v] = triplane::plane_cell(grid, kind, grid.unravel(v));
        const int missing = kind == PlaneKind::HW ? 2 : kind == PlaneKind::HD ? 1 : 0;
        const Var zeros = per_voxel.tape->constant(NdBuffer({cells, per_voxel.value().cols()}, 0.0));
        return ops::scale(ops::scatter_add_rows(zeros, std::move(cell), per_voxel), 1.0 / grid.dims[missing]);
    }

    Var local_gather(Var plane, Var theta, int r_max) {
        const PlaneShape ps = check_plane("local_gather", plane, theta);
        const std::size_t cells = ps.cells();
        const std::size_t d = ps.channels;
        const std::vector<int> r = radii(theta.value().ptr(), cells, r_max);
        NdBuffer out({static_cast<std::size_t>(ps.rows), static_cast<std::size_t>(ps.cols), d});
        std::vector<double> norm(cells);
        const double* pv = plane.value().ptr();
        const double* th = theta.value().ptr();
        parallel_for(cells, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t i = lo; i < hi; ++i) {
                const int a = static_cast<int>(i) / ps.cols;
                const int b = static_cast<int>(i) % ps.cols;
                double* o = out.ptr() + i * d;
                double s = 0.0;
                for (int ja = std::max(a - r[i], 0); ja <= std::min(a + r[i], ps.rows - 1); ++ja)
                    for (int jb = std::max(b - r[i], 0); jb <= std::min(b + r[i], ps.cols - 1); ++jb) {
                        const double w = std::exp(log_kernel(ja - a, jb - b, th[2 * i], th[2 * i + 1]));
                        const double* src = pv + (static_cast<std::size_t>(ja) * ps.cols + jb) * d;
                        for (std::size_t c = 0; c < d; ++c)
                            o[c] += w * src[c];
                        s += w;
                    }
                for (std::size_t c = 0; c < d; ++c)
                    o[c] /= s;
                norm[i] = s;
            }
        });
        const int r_all = r.empty() ? 0 : *std::max_element(r.begin(), r.end());
        NdBuffer result = out;
        return plane.tape->record("local_gather", std::move(result), {plane, theta},
                                  [plane, theta, ps, r, r_all, norm, out = std::move(out)](Tape& t, const NdBuffer& g) {
            NdBuffer* gp = t.grad_slot(plane);
            NdBuffer* gt = t.grad_slot(theta);
            const double* pv = t.value(plane).ptr();
            const double* th = t.value(theta).ptr();
            const std::size_t d = ps.channels;
            if (gt) {
                parallel_for(ps.cells(), [&](std::size_t lo, std::size_t hi) {
                    for (std::size_t i = lo; i < hi; ++i) {
                        const int a = static_cast<int>(i) / ps.cols;
                        const int b = static_cast<int>(i) % ps.cols;
                        const double ta = th[2 * i], tb = th[2 * i + 1];
                        const double* gi = g.ptr() + i * d;
                        const double* oi = out.ptr() + i * d;
                        double da_sum = 0.0, db_sum = 0.0;
                        for (int ja = std::max(a - r[i], 0); ja <= std::min(a + r[i], ps.rows - 1); ++ja)
                            for (int jb = std::max(b - r[i], 0); jb <= std::min(b + r[i], ps.cols - 1); ++jb) {
                                const int ea = ja - a, eb = jb - b;
                                const double w = std::exp(log_kernel(ea, eb, ta, tb)) / norm[i];
                                const double* src = pv + (static_cast<std::size_t>(ja) * ps.cols + jb) * d;
                                double dotv = 0.0;
                                for (std::size_t c = 0; c < d; ++c)
                                    dotv += gi[c] * (src[c] - oi[c]);
                                da_sum += w * dotv * ea * ea / (ta * ta * ta);
                                db_sum += w * dotv * eb * eb / (tb * tb * tb);
                            }
                        (*gt)[2 * i] += da_sum;
                        (*gt)[2 * i + 1] += db_sum;
                    }
                });
            }
            if (gp) {
                // Gather form over targets whose window contains the source.
                parallel_for(ps.cells(), [&](std::size_t lo, std::size_t hi) {
                    for (std::size_t j = lo; j < hi; ++j) {
                        const int ja = static_cast<int>(j) / ps.cols;
                        const int jb = static_cast<int>(j) % ps.cols;
                        double* dst = gp->ptr() + j * d;
                        for (int a = std::max(ja - r_all, 0); a <= std::min(ja + r_all, ps.rows - 1); ++a)
                            for (int b = std::max(jb - r_all, 0); b <= std::min(jb + r_all, ps.cols - 1); ++b) {
                                const std::size_t i = static_cast<std::size_t>(a) * ps.cols + b;
                                if (std::abs(ja - a) > r[i] || std::abs(jb - b) > r[i])
                                    continue;
                                const double w =
                                    std::exp(log_kernel(ja - a, jb - b, th[2 * i], th[2 * i + 1])) / norm[i];
                                const double* gi = g.ptr() + i * d;
                                for (std::size_t c = 0; c < d; ++c)
                                    dst[c] += w * gi[c];
                            }
                    }
                });
            }
        });
    }

    Var global_aggregate(Var plane, Var theta, Var alpha, int r_max) {
        const PlaneShape ps = check_plane("global_aggregate", plane, theta);
        const std::size_t cells = ps.cells();
        const std::size_t d = ps.channels;
        if (alpha.value().size() != cells)
            throw DimensionError(fmt::format("global_aggregate: {} alphas for {} cells", alpha.value().size(), cells));
        const double* al = alpha.value().ptr();
        for (std::size_t i = 0; i < cells; ++i)
            if (!(al[i] > 0.0))
                throw NumericError(fmt::format("global_aggregate: alpha of cell {} must be positive", i));
        const double* th = theta.value().ptr();
        const std::vector<int> r = radii(th, cells, r_max);
        const int r_all = r.empty() ? 0 : *std::max_element(r.begin(), r.end());
        // Source-side factor alpha_j / (2 pi theta_a theta_b).
        std::vector<double> amp(cells);
        for (std::size_t j = 0; j < cells; ++j)
            amp[j] = al[j] / (2.0 * std::numbers::pi * th[2 * j] * th[2 * j + 1]);

        NdBuffer out({static_cast<std::size_t>(ps.rows), static_cast<std::size_t>(ps.cols), d});
        std::vector<double> den(cells);
        const double* pv = plane.value().ptr();
        parallel_for(cells, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t i = lo; i < hi; ++i) {
                const int a = static_cast<int>(i) / ps.cols;
                const int b = static_cast<int>(i) % ps.cols;
                double* o = out.ptr() + i * d;
                double s = 0.0;
                for (int ja = std::max(a - r_all, 0); ja <= std::min(a + r_all, ps.rows - 1); ++ja)
                    for (int jb = std::max(b - r_all, 0); jb <= std::min(b + r_all, ps.cols - 1); ++jb) {
                        const std::size_t j = static_cast<std::size_t>(ja) * ps.cols + jb;
                        if (std::abs(a - ja) > r[j] || std::abs(b - jb) > r[j])
                            continue;
                        const double c = amp[j] * std::exp(log_kernel(a - ja, b - jb, th[2 * j], th[2 * j + 1]));
                        const double* src = pv + j * d;
                        for (std::size_t k = 0; k < d; ++k)
                            o[k] += c * src[k];
                        s += c;
                    }
                den[i] = s;
                if (s > kCoverageEps) {
                    for (std::size_t k = 0; k < d; ++k)
                        o[k] /= s;
                } else {
                    std::copy(pv + i * d, pv + (i + 1) * d, o);
                }
            }
        });
        NdBuffer result = out;
        return plane.tape->record(
            "global_aggregate", std::move(result), {plane, theta, alpha},
            [plane, theta, alpha, ps, r, amp, den, out = std::move(out)](Tape& t, const NdBuffer& g) {
                NdBuffer* gp = t.grad_slot(plane);
                NdBuffer* gt = t.grad_slot(theta);
                NdBuffer* ga = t.grad_slot(alpha);
                const double* pv = t.value(plane).ptr();
                const double* th = t.value(theta).ptr();
                const double* al = t.value(alpha).ptr();
                const std::size_t d = ps.channels;
                parallel_for(ps.cells(), [&](std::size_t lo, std::size_t hi) {
                    for (std::size_t j = lo; j < hi; ++j) {
                        const int ja = static_cast<int>(j) / ps.cols;
                        const int jb = static_cast<int>(j) % ps.cols;
                        const double ta = th[2 * j], tb = th[2 * j + 1];
                        const double* src = pv + j * d;
                        double d_alpha = 0.0, d_ta = 0.0, d_tb = 0.0;
                        double* dst = gp ? gp->ptr() + j * d : nullptr;
                        for (int a = std::max(ja - r[j], 0); a <= std::min(ja + r[j], ps.rows - 1); ++a)
                            for (int b = std::max(jb - r[j], 0); b <= std::min(jb + r[j], ps.cols - 1); ++b) {
                                const std::size_t i = static_cast<std::size_t>(a) * ps.cols + b;
                                if (!(den[i] > kCoverageEps))
                                    continue;
                                const int ea = a - ja, eb = b - jb;
                                const double c = amp[j] * std::exp(log_kernel(ea, eb, ta, tb));
                                const double* gi = g.ptr() + i * d;
                                const double* oi = out.ptr() + i * d;
                                double sdot = 0.0;
                                for (std::size_t k = 0; k < d; ++k)
                                    sdot += gi[k] * (src[k] - oi[k]);
                                sdot /= den[i];
                                d_alpha += sdot * c / al[j];
                                d_ta += sdot * c * (ea * ea / (ta * ta * ta) - 1.0 / ta);
                                d_tb += sdot * c * (eb * eb / (tb * tb * tb) - 1.0 / tb);
                                if (dst) {
                                    const double f = c / den[i];
                                    for (std::size_t k = 0; k < d; ++k)
                                        dst[k] += f * gi[k];
                                }
                            }
                        if (dst && !(den[j] > kCoverageEps))
                            for (std::size_t k = 0; k < d; ++k)
                                dst[k] += g[j * d + k];
                        if (ga)
                            (*ga)[j] += d_alpha;
                        if (gt) {
                            (*gt)[2 * j] += d_ta;
                            (*gt)[2 * j + 1] += d_tb;
                        }
                    }
                });
            });
    }

    Var blend(Var gather, Var agg, double beta) {
        if (!(beta >= 0.0 && beta <= 1.0))
            throw ConfigError(fmt::format("blend coefficient beta must lie in [0, 1] (got {})", beta));
        if (beta == 1.0)
            return gather;
        if (beta == 0.0)
            return agg;
        if (gather.shape() != agg.shape())
            throw DimensionError(fmt::format("blend: {} vs {}", shape_string(gather.shape()), shape_string(agg.shape())));
        return ops::add(ops::scale(gather, beta), ops::scale(agg, 1.0 - beta));
    }

    Var lift_merge(Graph& g, const triplane::TriplaneSet& tri, const triplane::MergeParams& merge,
                   const std::vector<geom::VoxelIndex>& voxels) {
        return triplane::gather_merge(g, tri, merge, voxels);
    }

    Var semantic_head(Graph& g, Var field, const Linear& head) { return apply(g, head, field); }

    std::array<anchor::VoxelProjection, 3> project_planes(const VoxelGridSpec& grid, const geom::CameraIntrinsics& intr,
                                                          const geom::CameraPose& pose, double stride) {
        grid.validate();
        intr.validate();
        pose.validate();
        if (!(stride > 0.0))
            throw ConfigError(fmt::format("feature stride must be positive (got {})", stride));
        std::array<anchor::VoxelProjection, 3> out;
        for (auto kind : triplane::kPlanes) {
            auto& proj = out[static_cast<int>(kind)];
            const auto ext = triplane::plane_extent(grid, kind);
            const std::size_t cells = static_cast<std::size_t>(ext[0]) * static_cast<std::size_t>(ext[1]);
            proj.in_view.assign(cells, 0);
            std::vector<double> coords;
            for (int a = 0; a < ext[0]; ++a)
                for (int b = 0; b < ext[1]; ++b) {
                    geom::Vec3 pos{};
                    for (int axis = 0; axis < 3; ++axis)
                        pos[axis] = grid.origin[axis] + 0.5 * grid.dims[axis] * grid.resolution;
                    const auto centre = [&](int axis, int i) { return grid.origin[axis] + (i + 0.5) * grid.resolution; };
                    if (kind == PlaneKind::HW) {
                        pos[0] = centre(0, a);
                        pos[1] = centre(1, b);
                    } else if (kind == PlaneKind::HD) {
                        pos[0] = centre(0, a);
                        pos[2] = centre(2, b);
                    } else {
                        pos[1] = centre(1, a);
                        pos[2] = centre(2, b);
                    }
                    const auto p = geom::project(pos, intr, pose);
                    if (!p || !geom::in_image(p->u, p->v, intr))
                        continue;
                    const auto cell = static_cast<std::size_t>(a) * ext[1] + b;
                    proj.in_view[cell] = 1;
                    proj.rows.push_back(static_cast<std::int32_t>(cell));
                    coords.push_back(p->u / stride - 0.5);
                    coords.push_back(p->v / stride - 0.5);
                }
            if (proj.rows.empty())
                proj.coords = NdBuffer({1, 2}, 0.0);
            else
                proj.coords = NdBuffer({proj.rows.size(), 2}, std::move(coords));
        }
        return out;
    }

    Stage2Params make_stage2(ParamStore& store, const Stage2Config& cfg, Rng& rng) {
        if (!(cfg.beta >= 0.0 && cfg.beta <= 1.0))
            throw ConfigError(fmt::format("blend coefficient beta must lie in [0, 1] (got {})", cfg.beta));
        Stage2Params p;
        const std::size_t d = cfg.width;
        const std::size_t dt = cfg.token_width;
        p.tokens = make_tokens(store, "s2.tokens", cfg.grid, dt, rng);
        p.level_weights = store.add("s2.level_weights", NdBuffer({cfg.levels}, 0.0));
        p.condition = triplane::make_deform_attn(store, "s2.condition", dt, cfg.image_channels, dt, cfg.points, rng);
        p.emb = triplane::make_axis_embeddings(store, "s2.emb", cfg.grid, cfg.embed_width, d, rng);
        p.scatter = triplane::make_scatter_params(store, "s2.scatter", dt, d, d, rng);
        for (auto k : triplane::kPlanes) {
            auto& b = p.planes[static_cast<int>(k)];
            const std::string name = fmt::format("s2.plane_{}", triplane::plane_name(k));
            b.self_attn = triplane::make_deform_attn(store, name + ".self", d, d, d, cfg.points, rng);
            b.cross_attn = triplane::make_deform_attn(store, name + ".cross", d, cfg.image_channels, d, cfg.points, rng);
        }
        p.geometry_merge = triplane::make_merge(store, "s2.geometry", d, d, d, rng);
        if (!(cfg.sigma_lo > 0.0 && cfg.sigma_lo < cfg.sigma_hi))
            throw ConfigError(fmt::format("sigma band [{}, {}] must satisfy 0 < lo < hi", cfg.sigma_lo, cfg.sigma_hi));
        p.decoder = make_plane_decoder(store, "s2.gaussians", d, rng);
        p.decoder.sigma_lo = cfg.sigma_lo;
        p.decoder.sigma_hi = cfg.sigma_hi;
        p.lift = triplane::make_merge(store, "s2.lift", d, d, d, rng);
        p.head = make_linear(store, "s2.head", d, cfg.num_classes, rng);
        return p;
    }

    Stage2Output stage2_forward(Graph& g, const Stage2Config& cfg, const Stage2Params& params, const Stage2Input& in) {
        const auto& grid = cfg.grid;
        const std::size_t n = grid.voxel_count();
        if (in.occupancy.size() != n)
            throw DimensionError(fmt::format("occupancy mask covers {} voxels, grid has {}", in.occupancy.size(), n));
        if (in.projection.in_view.size() != n)
            throw DimensionError(fmt::format("projection covers {} voxels, grid has {}", in.projection.in_view.size(), n));
        Stage2Output out;
        const auto fmap = anchor::fuse_levels(in.pyramid, g.param(params.level_weights));

        const Var gated = occupancy_gate(voxel_tokens(g, params.tokens, grid), in.occupancy);
        out.tokens = condition_tokens(g, gated, in.occupancy, in.projection, fmap.features, params.condition);

        std::vector<geom::VoxelIndex> active;
        std::vector<std::int32_t> active_rows;
        for (std::size_t v = 0; v < n; ++v)
            if (in.occupancy[v]) {
                active.push_back(grid.unravel(v));
                active_rows.push_back(static_cast<std::int32_t>(v));
            }
        auto tri = triplane::empty_triplane(g, grid, cfg.width);
        if (!active.empty())
            tri = triplane::scatter_queries(g, tri, params.scatter, params.emb, active,
                                            ops::gather_rows(out.tokens, std::move(active_rows)));
        tri = triplane::count_normalize(tri);

        for (auto kind : triplane::kPlanes) {
            const int p = static_cast<int>(kind);
            const auto& block = params.planes[p];
            const Shape shape = tri.planes[p].shape();
            const std::size_t cells = shape[0] * shape[1];
            NdBuffer refs({cells, 2});
            for (std::size_t i = 0; i < cells; ++i) {
                refs[2 * i] = static_cast<double>(i % shape[1]);
                refs[2 * i + 1] = static_cast<double>(i / shape[1]);
            }
            // Updates only touch cells that received an active token, so empty space stays empty.
            const auto& counts = tri.counts[p];
            std::vector<double> occupied(cells);
            for (std::size_t i = 0; i < cells; ++i)
                occupied[i] = counts[i] > 0 ? 1.0 : 0.0;
            Var flat = ops::reshape(tri.planes[p], {cells, shape[2]});
            const Var self = triplane::deform_sample_attend(g, flat, g.constant(std::move(refs)), tri.planes[p],
                                                            block.self_attn);
            flat = ops::add(flat, ops::mul_rows(self, g.constant(NdBuffer::vector(std::move(occupied)))));
            const auto& proj = in.plane_projection[p];
            if (proj.in_view.size() != cells)
                throw DimensionError(fmt::format("plane {} projection covers {} cells, plane has {}",
                                                 triplane::plane_name(kind), proj.in_view.size(), cells));
            std::vector<std::int32_t> rows, ref_rows;
            for (std::size_t i = 0; i < proj.rows.size(); ++i)
                if (counts[static_cast<std::size_t>(proj.rows[i])] > 0) {
                    rows.push_back(proj.rows[i]);
                    ref_rows.push_back(static_cast<std::int32_t>(i));
                }
            if (!rows.empty()) {
                const Var q = ops::gather_rows(flat, rows);
                const Var refs_in = ops::gather_rows(g.constant(proj.coords), std::move(ref_rows));
                flat = ops::scatter_add_rows(
                    flat, std::move(rows), triplane::deform_sample_attend(g, q, refs_in, fmap.features, block.cross_attn));
            }
            tri.planes[p] = ops::reshape(flat, shape);
        }
        out.planes = tri;

        const auto voxels = triplane::all_voxels(grid);
        out.geometry = triplane::gather_merge(g, tri, params.geometry_merge, voxels);
        out.gaussians = decode_plane_gaussians(g, params.decoder, out.geometry);

        triplane::TriplaneSet refined = tri;
        const Var alpha = ops::reshape(out.gaussians.alpha, {n, 1});
        for (auto kind : triplane::kPlanes) {
            const int p = static_cast<int>(kind);
            const Var theta = fiber_mean(out.gaussians.theta[p], grid, kind);
            Var gathered, aggregated;
            if (cfg.beta > 0.0)
                gathered = local_gather(tri.planes[p], theta, cfg.r_max);
            if (cfg.beta < 1.0) {
                const Var a = fiber_mean(alpha, grid, kind);
                aggregated = global_aggregate(tri.planes[p], theta, ops::reshape(a, {a.value().rows()}), cfg.r_max);
            }
            refined.planes[p] = blend(gathered, aggregated, cfg.beta);
        }
        out.refined = refined;
        out.features = lift_merge(g, refined, params.lift, voxels);
        out.logits = semantic_head(g, out.features, params.head);
        return out;
    }

    std::vector<std::uint8_t> predict_labels(const NdBuffer& logits, const std::vector<std::uint8_t>& occupancy) {
        if (logits.rank() != 2 || logits.rows() != occupancy.size())
            throw DimensionError(fmt::format("predict_labels: logits {} for {} voxels", shape_string(logits.shape()),
                                             occupancy.size()));
        const std::size_t c = logits.cols();
        std::vector<std::uint8_t> out(occupancy.size(), geom::kEmptyLabel);
        for (std::size_t v = 0; v < out.size(); ++v) {
            if (!occupancy[v])
                continue;
            const double* row = logits.ptr() + v * c;
            out[v] = static_cast<std::uint8_t>(std::max_element(row, row + c) - row);
        }
        return out;
    }

} // namespace gssc::refine
