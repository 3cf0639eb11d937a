/* SPDX-FileCopyrightText: 2026 GaussianSSC Authors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#include "gssc/anchoring.hpp"
#include "gssc/error.hpp"
#include "gssc/ops.hpp"
#include "gssc/parallel.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <type_traits>

namespace gssc::anchor {

    namespace {
        double round_half_up(double x) { return std::floor(x + 0.5); }

        NdBuffer resample_to(const NdBuffer& level, double stride, std::size_t rows, std::size_t cols,
                             double base_stride) {
            if (level.rank() != 3)
                throw DimensionError(fmt::format("feature level must be [H x W x C], got {}", shape_string(level.shape())));
            if (level.dim(0) == rows && level.dim(1) == cols && stride == base_stride)
                return level;
            NdBuffer coords({rows * cols, 2});
            const double ratio = base_stride / stride;
            for (std::size_t i = 0; i < rows; ++i)
                for (std::size_t j = 0; j < cols; ++j) {
                    coords[(i * cols + j) * 2] = (static_cast<double>(j) + 0.5) * ratio - 0.5;
                    coords[(i * cols + j) * 2 + 1] = (static_cast<double>(i) + 0.5) * ratio - 0.5;
                }
            Tape t;
            auto out = ops::sample_bilinear(t.constant(level), t.constant(std::move(coords)));
            return out.value().reshaped({rows, cols, level.dim(2)});
        }
    } // namespace

    FusedFeatureMap fuse_levels(const FeaturePyramid& pyramid, Var level_weights) {
        if (pyramid.levels.empty())
            throw ConfigError("fuse_levels needs at least one feature level");
        if (pyramid.strides.size() != pyramid.levels.size())
            throw ConfigError(fmt::format("{} feature levels but {} strides", pyramid.levels.size(),
                                          pyramid.strides.size()));
        if (level_weights.value().size() != pyramid.levels.size())
            throw DimensionError(fmt::format("{} level weights for {} levels", level_weights.value().size(),
                                             pyramid.levels.size()));
        for (double s : pyramid.strides)
            if (!(s > 0.0))
                throw ConfigError(fmt::format("feature stride must be positive (got {})", s));
        const auto& base = pyramid.levels.front();
        std::vector<NdBuffer> resampled;
        for (std::size_t l = 0; l < pyramid.levels.size(); ++l) {
            resampled.push_back(resample_to(pyramid.levels[l], pyramid.strides[l], base.dim(0), base.dim(1),
                                            pyramid.strides.front()));
            if (resampled.back().dim(2) != base.dim(2))
                throw DimensionError("feature levels must share the channel count");
        }
        const std::size_t n = pyramid.levels.size();
        const Var w = ops::reshape(ops::softmax_rows(ops::reshape(level_weights, {1, n})), {n});
        return {ops::weighted_sum(resampled, w), pyramid.strides.front()};
    }

    AnchorDecoder make_anchor_decoder(ParamStore& store, const std::string& name, std::size_t width, Rng& rng) {
        AnchorDecoder dec;
        dec.head = make_linear(store, name, width, 5, rng, 0.1);
        return dec;
    }

    AnchorField decode_anchor(Graph& g, const AnchorDecoder& dec, Var descriptors) {
        const Var raw = apply(g, dec.head, descriptors);
        AnchorField a;
        a.delta = ops::slice_cols(raw, 0, 2);
        a.sigma = ops::softplus_clamped(ops::slice_cols(raw, 2, 2), dec.sigma_lo, dec.sigma_hi);
        a.alpha = ops::reshape(ops::sigmoid(ops::slice_cols(raw, 4, 1)), {raw.value().rows()});
        return a;
    }

    std::vector<std::array<int, 2>> window_offsets(int radius) {
        std::vector<std::array<int, 2>> off;
        for (int dv = -radius; dv <= radius; ++dv)
            for (int du = -radius; du <= radius; ++du)
                off.push_back({du, dv});
        return off;
    }

    Var anchor_weights(Var mu, Var sigma, Var alpha, int radius) {
        const std::size_t n = mu.value().rows();
        if (mu.value().cols() != 2 || sigma.value().rows() != n || sigma.value().cols() != 2 || alpha.value().size() != n)
            throw DimensionError(fmt::format("anchor_weights: mu {}, sigma {}, alpha {}", shape_string(mu.shape()),
                                             shape_string(sigma.shape()), shape_string(alpha.shape())));
        const auto off = window_offsets(radius);
        const std::size_t k = off.size();
        NdBuffer out({n, k});
        const double* m = mu.value().ptr();
        const double* s = sigma.value().ptr();
        const double* a = alpha.value().ptr();
        parallel_for(n, [&](std::size_t lo, std::size_t hi) {
            std::vector<double> logw(k);
            for (std::size_t i = lo; i < hi; ++i) {
                if (!(s[2 * i] > 0.0 && s[2 * i + 1] > 0.0 && a[i] > 0.0))
                    throw NumericError(fmt::format("anchor {} needs sigma > 0 and alpha > 0", i));
                const double cu = round_half_up(m[2 * i]);
                const double cv = round_half_up(m[2 * i + 1]);
                double best = -std::numeric_limits<double>::infinity();
                for (std::size_t j = 0; j < k; ++j) {
                    const double eu = (cu + off[j][0] - m[2 * i]) / s[2 * i];
                    const double ev = (cv + off[j][1] - m[2 * i + 1]) / s[2 * i + 1];
                    logw[j] = std::log(a[i]) - 0.5 * (eu * eu + ev * ev);
                    best = std::max(best, logw[j]);
                }
                double total = 0.0;
                for (std::size_t j = 0; j < k; ++j)
                    total += (out[i * k + j] = std::exp(logw[j] - best));
                for (std::size_t j = 0; j < k; ++j)
                    out[i * k + j] /= total;
            }
        });
        return mu.tape->record("anchor_weights", std::move(out), {mu, sigma, alpha},
                               [mu, sigma, alpha, off, n, k](Tape& t, const NdBuffer& g) {
            NdBuffer* gm = t.grad_slot(mu);
            NdBuffer* gs = t.grad_slot(sigma);
            NdBuffer* ga = t.grad_slot(alpha);
            const double* m = t.value(mu).ptr();
            const double* s = t.value(sigma).ptr();
            const double* a = t.value(alpha).ptr();
            // The output is softmax(log w~), so d/dtheta = sum_j (g_j - <g, w>) w_j dlog w~_j/dtheta.
            parallel_for(n, [&](std::size_t lo, std::size_t hi) {
                std::vector<double> w(k), eu(k), ev(k);
                for (std::size_t i = lo; i < hi; ++i) {
                    const double cu = round_half_up(m[2 * i]);
                    const double cv = round_half_up(m[2 * i + 1]);
                    double best = -std::numeric_limits<double>::infinity();
                    for (std::size_t j = 0; j < k; ++j) {
                        eu[j] = cu + off[j][0] - m[2 * i];
                        ev[j] = cv + off[j][1] - m[2 * i + 1];
                        const double qu = eu[j] / s[2 * i];
                        const double qv = ev[j] / s[2 * i + 1];
                        w[j] = -0.5 * (qu * qu + qv * qv);
                        best = std::max(best, w[j]);
                    }
                    double total = 0.0;
                    for (std::size_t j = 0; j < k; ++j)
                        total += (w[j] = std::exp(w[j] - best));
                    double mean_g = 0.0;
                    for (std::size_t j = 0; j < k; ++j) {
                        w[j] /= total;
                        mean_g += g[i * k + j] * w[j];
                    }
                    const double su2 = s[2 * i] * s[2 * i];
                    const double sv2 = s[2 * i + 1] * s[2 * i + 1];
                    double dmu_u = 0.0, dmu_v = 0.0, dsu = 0.0, dsv = 0.0, da = 0.0;
                    for (std::size_t j = 0; j < k; ++j) {
                        const double c = (g[i * k + j] - mean_g) * w[j];
                        dmu_u += c * eu[j] / su2;
                        dmu_v += c * ev[j] / sv2;
                        dsu += c * eu[j] * eu[j] / (su2 * s[2 * i]);
                        dsv += c * ev[j] * ev[j] / (sv2 * s[2 * i + 1]);
                        da += c / a[i];
                    }
                    if (gm) {
                        (*gm)[2 * i] += dmu_u;
                        (*gm)[2 * i + 1] += dmu_v;
                    }
                    if (gs) {
                        (*gs)[2 * i] += dsu;
                        (*gs)[2 * i + 1] += dsv;
                    }
                    if (ga)
                        (*ga)[i] += da;
                }
            });
        });
    }

    Var anchor_aggregate(Var fmap, Var mu, Var sigma, Var alpha, int radius) {
        const auto& shape = fmap.shape();
        if (shape.size() != 3)
            throw DimensionError(fmt::format("anchor_aggregate expects [H x W x C], got {}", shape_string(shape)));
        const int h = static_cast<int>(shape[0]);
        const int w = static_cast<int>(shape[1]);
        const std::size_t n = mu.value().rows();
        const auto off = window_offsets(radius);
        std::vector<std::int32_t> idx(n * off.size());
        const double* m = mu.value().ptr();
        for (std::size_t i = 0; i < n; ++i) {
            const int cu = static_cast<int>(round_half_up(m[2 * i]));
            const int cv = static_cast<int>(round_half_up(m[2 * i + 1]));
            for (std::size_t j = 0; j < off.size(); ++j) {
                const int u = std::clamp(cu + off[j][0], 0, w - 1);
                const int v = std::clamp(cv + off[j][1], 0, h - 1);
                idx[i * off.size() + j] = v * w + u;
            }
        }
        const Var texels = ops::gather_rows(ops::reshape(fmap, {shape[0] * shape[1], shape[2]}), std::move(idx));
        return ops::group_weighted_sum(texels, anchor_weights(mu, sigma, alpha, radius));
    }

    GateParams make_gate(ParamStore& store, const std::string& name, std::size_t feature_channels, std::size_t width,
                         Rng& rng) {
        GateParams p;
        p.proj = make_linear(store, name + ".proj", feature_channels, width, rng);
        p.gate = make_linear(store, name + ".gate", 2 * width, width, rng);
        return p;
    }

    Var gate_values(Graph& g, Var f, Var anchor, const GateParams& params) {
        const Var p = apply(g, params.proj, anchor);
        return ops::sigmoid(apply(g, params.gate, ops::concat_cols({f, p})));
    }

    Var gated_fuse(Graph& g, Var f, Var anchor, Var mask, const GateParams& params) {
        const Var p = apply(g, params.proj, anchor);
        const Var a = ops::sigmoid(apply(g, params.gate, ops::concat_cols({f, p})));
        return ops::add(f, ops::mul_rows(ops::mul(a, p), mask));
    }

    OccHeadParams make_occ_head(ParamStore& store, const std::string& name, std::size_t width, std::size_t hidden,
                                Rng& rng) {
        OccHeadParams p;
        p.in = make_linear(store, name + ".in", width, hidden, rng);
        const double bound = 0.5 * std::sqrt(6.0 / static_cast<double>(28 * hidden));
        for (int b = 0; b < 2; ++b) {
            p.conv_weight[b] =
                store.add(fmt::format("{}.block{}.weight", name, b), uniform_buffer({27 * hidden, hidden}, bound, rng));
            p.conv_bias[b] = store.add(fmt::format("{}.block{}.bias", name, b), NdBuffer({hidden}, 0.0));
        }
        p.out = make_linear(store, name + ".out", hidden, 2, rng);
        return p;
    }

    std::vector<std::int32_t> voxel_neighbours(const VoxelGridSpec& grid, int dilation) {
        const auto n = grid.voxel_count();
        std::vector<std::int32_t> idx(n * 27);
        parallel_for(n, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t v = lo; v < hi; ++v) {
                const auto c = grid.unravel(v);
                std::size_t j = v * 27;
                for (int dx = -1; dx <= 1; ++dx)
                    for (int dy = -1; dy <= 1; ++dy)
                        for (int dz = -1; dz <= 1; ++dz) {
                            const geom::VoxelIndex u{std::clamp(c.x + dx * dilation, 0, grid.dims[0] - 1),
                                                     std::clamp(c.y + dy * dilation, 0, grid.dims[1] - 1),
                                                     std::clamp(c.z + dz * dilation, 0, grid.dims[2] - 1)};
                            idx[j++] = static_cast<std::int32_t>(grid.linear(u));
                        }
            }
        });
        return idx;
    }

    namespace {
        constexpr std::size_t kTaps = 27;
        constexpr std::size_t kReduceBlock = 1024;

        // Tap table plus its inverse: for voxel u, every (v, tap) with nbr[v][tap] == u
        // in ascending order of v * 27 + tap.
        struct Neighbourhood {
            std::vector<std::int32_t> nbr;
            std::vector<std::size_t> offsets;
            std::vector<std::int32_t> sources;  // v * 27 + tap
        };

        std::shared_ptr<const Neighbourhood> neighbourhood(const VoxelGridSpec& grid, int dilation) {
            static std::mutex mu;
            static std::map<std::array<int, 4>, std::shared_ptr<const Neighbourhood>> cache;
            const std::array<int, 4> key{grid.dims[0], grid.dims[1], grid.dims[2], dilation};
            std::lock_guard lock(mu);
            if (auto it = cache.find(key); it != cache.end())
                return it->second;
            auto nb = std::make_shared<Neighbourhood>();
            nb->nbr = voxel_neighbours(grid, dilation);
            const std::size_t n = grid.voxel_count();
            nb->offsets.assign(n + 1, 0);
            for (auto u : nb->nbr)
                ++nb->offsets[static_cast<std::size_t>(u) + 1];
            for (std::size_t u = 0; u < n; ++u)
                nb->offsets[u + 1] += nb->offsets[u];
            nb->sources.resize(nb->nbr.size());
            std::vector<std::size_t> cursor(nb->offsets.begin(), nb->offsets.end() - 1);
            for (std::size_t j = 0; j < nb->nbr.size(); ++j)
                nb->sources[cursor[static_cast<std::size_t>(nb->nbr[j])]++] = static_cast<std::int32_t>(j);
            if (cache.size() > 16)
                cache.clear();
            cache.emplace(key, nb);
            return nb;
        }

        // C > 0 fixes the channel count at compile time; C == 0 reads it from c.
        template <std::size_t C>
        void conv_forward_rows(const Neighbourhood& nb, const double* __restrict xp, const double* __restrict w,
                               const double* __restrict b, double* __restrict op,
                               std::size_t c_rt, std::size_t lo, std::size_t hi) {
            const std::size_t c = C ? C : c_rt;
            for (std::size_t v = lo; v < hi; ++v) {
                double* o = op + v * c;
                std::copy(b, b + c, o);
                for (std::size_t t = 0; t < kTaps; ++t) {
                    const double* xu = xp + static_cast<std::size_t>(nb.nbr[v * kTaps + t]) * c;
                    const double* wt = w + t * c * c;
                    for (std::size_t i = 0; i < c; ++i) {
                        const double xi = xu[i];
                        const double* wr = wt + i * c;
                        for (std::size_t k = 0; k < c; ++k)
                            o[k] += xi * wr[k];
                    }
                }
            }
        }

        // wt_t holds every tap transposed, [27 x c_out x c_in].
        template <std::size_t C>
        void conv_input_grad_rows(const Neighbourhood& nb, const double* __restrict gp, const double* __restrict wt_t,
                                  double* __restrict dx,
                                  std::size_t c_rt, std::size_t lo, std::size_t hi) {
            const std::size_t c = C ? C : c_rt;
            for (std::size_t u = lo; u < hi; ++u) {
                double* du = dx + u * c;
                for (std::size_t s = nb.offsets[u]; s < nb.offsets[u + 1]; ++s) {
                    const auto j = static_cast<std::size_t>(nb.sources[s]);
                    const double* gv = gp + (j / kTaps) * c;
                    const double* wt = wt_t + (j % kTaps) * c * c;
                    for (std::size_t k = 0; k < c; ++k) {
                        const double gk = gv[k];
                        const double* wr = wt + k * c;
                        for (std::size_t i = 0; i < c; ++i)
                            du[i] += gk * wr[i];
                    }
                }
            }
        }

        template <std::size_t C>
        void conv_param_grad_block(const Neighbourhood& nb, const double* __restrict xp, const double* __restrict gp,
                                   double* __restrict pw, double* __restrict pb,
                                   bool want_w, std::size_t c_rt, std::size_t v0, std::size_t v1) {
            const std::size_t c = C ? C : c_rt;
            for (std::size_t v = v0; v < v1; ++v) {
                const double* gv = gp + v * c;
                for (std::size_t k = 0; k < c; ++k)
                    pb[k] += gv[k];
                if (!want_w)
                    continue;
                for (std::size_t tap = 0; tap < kTaps; ++tap) {
                    const double* xu = xp + static_cast<std::size_t>(nb.nbr[v * kTaps + tap]) * c;
                    double* pt = pw + tap * c * c;
                    for (std::size_t i = 0; i < c; ++i) {
                        const double xi = xu[i];
                        for (std::size_t k = 0; k < c; ++k)
                            pt[i * c + k] += xi * gv[k];
                    }
                }
            }
        }

        template <class F>
        void with_channels(std::size_t c, F&& f) {
            switch (c) {
            case 4: f(std::integral_constant<std::size_t, 4>{}); break;
            case 8: f(std::integral_constant<std::size_t, 8>{}); break;
            case 16: f(std::integral_constant<std::size_t, 16>{}); break;
            case 32: f(std::integral_constant<std::size_t, 32>{}); break;
            default: f(std::integral_constant<std::size_t, 0>{}); break;
            }
        }
    } // namespace

    Var conv3d(Var field, Var weight, Var bias, const VoxelGridSpec& grid, int dilation) {
        const std::size_t n = grid.voxel_count();
        const NdBuffer& x = field.value();
        if (x.rank() != 2 || x.rows() != n)
            throw DimensionError(fmt::format("conv3d: field {} does not cover {} voxels", shape_string(x.shape()), n));
        const std::size_t c = x.cols();
        if (weight.value().shape() != Shape{kTaps * c, c} || bias.value().size() != c)
            throw DimensionError(fmt::format("conv3d: weight {} / bias {} for {} channels",
                                             shape_string(weight.shape()), shape_string(bias.shape()), c));
        const auto nb = neighbourhood(grid, dilation);
        NdBuffer out({n, c});
        {
            const double* xp = x.ptr();
            const double* w = weight.value().ptr();
            const double* b = bias.value().ptr();
            double* op = out.ptr();
            with_channels(c, [&](auto C) {
                parallel_for(n, [&](std::size_t lo, std::size_t hi) {
                    conv_forward_rows<decltype(C)::value>(*nb, xp, w, b, op, c, lo, hi);
                });
            });
        }
        return field.tape->record("conv3d", std::move(out), {field, weight, bias},
                                  [field, weight, bias, nb, n, c](Tape& t, const NdBuffer& g) {
            const double* gp = g.ptr();
            if (NdBuffer* gx = t.grad_slot(field)) {
                const double* w = t.value(weight).ptr();
                std::vector<double> wt_t(kTaps * c * c);
                for (std::size_t tap = 0; tap < kTaps; ++tap)
                    for (std::size_t i = 0; i < c; ++i)
                        for (std::size_t k = 0; k < c; ++k)
                            wt_t[(tap * c + k) * c + i] = w[(tap * c + i) * c + k];
                double* dx = gx->ptr();
                with_channels(c, [&](auto C) {
                    parallel_for(n, [&](std::size_t lo, std::size_t hi) {
                        conv_input_grad_rows<decltype(C)::value>(*nb, gp, wt_t.data(), dx, c, lo, hi);
                    });
                });
            }
            NdBuffer* gw = t.grad_slot(weight);
            NdBuffer* gb = t.grad_slot(bias);
            if (!gw && !gb)
                return;
            // Fixed blocks of voxels, summed in block order.
            const std::size_t blocks = (n + kReduceBlock - 1) / kReduceBlock;
            const std::size_t wsize = kTaps * c * c;
            std::vector<double> partial(blocks * (wsize + c), 0.0);
            const double* xp = t.value(field).ptr();
            parallel_for(blocks, [&](std::size_t lo, std::size_t hi) {
                for (std::size_t blk = lo; blk < hi; ++blk) {
                    double* pw = partial.data() + blk * (wsize + c);
                    double* pb = pw + wsize;
                    const std::size_t v1 = std::min(n, (blk + 1) * kReduceBlock);
                    with_channels(c, [&](auto C) {
                        conv_param_grad_block<decltype(C)::value>(*nb, xp, gp, pw, pb, gw != nullptr, c, blk * kReduceBlock, v1);
                    });
                }
            }, 1);
            for (std::size_t blk = 0; blk < blocks; ++blk) {
                const double* pw = partial.data() + blk * (wsize + c);
                if (gw)
                    for (std::size_t i = 0; i < wsize; ++i)
                        (*gw)[i] += pw[i];
                if (gb)
                    for (std::size_t k = 0; k < c; ++k)
                        (*gb)[k] += pw[wsize + k];
            }
        });
    }

    Var occupancy_head(Graph& g, Var field, const VoxelGridSpec& grid, const OccHeadParams& params) {
        Var h = apply(g, params.in, field);
        for (int b = 0; b < 2; ++b)
            h = ops::add(h, ops::silu(conv3d(h, g.param(params.conv_weight[b]), g.param(params.conv_bias[b]), grid,
                                             b + 1)));
        return apply(g, params.out, h);
    }

    VoxelProjection project_grid(const VoxelGridSpec& grid, const geom::CameraIntrinsics& intr,
                                 const geom::CameraPose& pose, double stride) {
        grid.validate();
        intr.validate();
        pose.validate();
        if (!(stride > 0.0))
            throw ConfigError(fmt::format("feature stride must be positive (got {})", stride));
        VoxelProjection out;
        const std::size_t n = grid.voxel_count();
        out.in_view.assign(n, 0);
        std::vector<double> coords;
        for (std::size_t v = 0; v < n; ++v) {
            const auto p = geom::project(geom::voxel_center(grid, grid.unravel(v)), intr, pose);
            if (!p || !geom::in_image(p->u, p->v, intr))
                continue;
            out.in_view[v] = 1;
            out.rows.push_back(static_cast<std::int32_t>(v));
            coords.push_back(p->u / stride - 0.5);
            coords.push_back(p->v / stride - 0.5);
        }
        if (out.rows.empty())
            out.coords = NdBuffer({1, 2}, 0.0);
        else
            out.coords = NdBuffer({out.rows.size(), 2}, std::move(coords));
        return out;
    }

    Stage1Params make_stage1(ParamStore& store, const Stage1Config& cfg, Rng& rng) {
        Stage1Params p;
        const std::size_t d = cfg.width;
        p.emb = triplane::make_axis_embeddings(store, "s1.emb", cfg.grid, cfg.embed_width, d, rng);
        p.scatter = triplane::make_scatter_params(store, "s1.scatter", cfg.feature_width, d, d, rng);
        for (auto k : triplane::kPlanes)
            p.refine[static_cast<int>(k)] =
                triplane::make_plane_refine(store, fmt::format("s1.refine_{}", triplane::plane_name(k)), d, rng);
        p.merge = triplane::make_merge(store, "s1.merge", d, d, d, rng);
        p.level_weights = store.add("s1.level_weights", NdBuffer({cfg.levels}, 0.0));
        if (cfg.window_radius < 0)
            throw ConfigError(fmt::format("anchor window radius must be non-negative (got {})", cfg.window_radius));
        if (!(cfg.sigma_lo > 0.0 && cfg.sigma_lo < cfg.sigma_hi))
            throw ConfigError(fmt::format("sigma band [{}, {}] must satisfy 0 < lo < hi", cfg.sigma_lo, cfg.sigma_hi));
        p.decoder = make_anchor_decoder(store, "s1.anchor", d, rng);
        p.decoder.sigma_lo = cfg.sigma_lo;
        p.decoder.sigma_hi = cfg.sigma_hi;
        p.gate = make_gate(store, "s1.fuse", cfg.image_channels, d, rng);
        p.head = make_occ_head(store, "s1.head", d, cfg.head_width, rng);
        return p;
    }

    Stage1Output stage1_forward(Graph& g, const Stage1Config& cfg, const Stage1Params& params, const Stage1Input& in) {
        const auto& grid = cfg.grid;
        const std::size_t n = grid.voxel_count();
        if (in.projection.in_view.size() != n)
            throw DimensionError(fmt::format("projection covers {} voxels, grid has {}", in.projection.in_view.size(), n));
        Stage1Output out;

        auto tri = triplane::empty_triplane(g, grid, cfg.width);
        if (!in.query_idx.empty())
            tri = triplane::scatter_queries(g, tri, params.scatter, params.emb, in.query_idx,
                                            g.constant(in.query_features));
        tri = triplane::count_normalize(tri);
        for (int p = 0; p < 3; ++p)
            tri.planes[p] = triplane::refine_plane(g, tri.planes[p], params.refine[p]);
        out.planes = tri;
        out.descriptors = triplane::gather_merge(g, tri, params.merge, triplane::all_voxels(grid));

        out.fmap = fuse_levels(in.pyramid, g.param(params.level_weights));
        const std::size_t channels = out.fmap.features.value().dim(2);
        Var anchor = g.constant(NdBuffer({n, channels}, 0.0));
        const auto& rows = in.projection.rows;
        if (!rows.empty()) {
            const Var coords = g.constant(in.projection.coords);
            Var g_in;
            if (cfg.mode == AnchorMode::Gaussian) {
                const Var f_in = ops::gather_rows(out.descriptors, rows);
                out.anchors = decode_anchor(g, params.decoder, f_in);
                const Var mu = ops::add(coords, out.anchors.delta);
                g_in = anchor_aggregate(out.fmap.features, mu, out.anchors.sigma, out.anchors.alpha, cfg.window_radius);
            } else {
                g_in = ops::sample_bilinear(out.fmap.features, coords);
            }
            anchor = ops::scatter_add_rows(anchor, rows, g_in);
        }
        std::vector<double> mask(n);
        for (std::size_t v = 0; v < n; ++v)
            mask[v] = in.projection.in_view[v] ? 1.0 : 0.0;
        out.fused = gated_fuse(g, out.descriptors, anchor, g.constant(NdBuffer::vector(std::move(mask))), params.gate);
        out.logits = occupancy_head(g, out.fused, grid, params.head);
        out.probs = ops::softmax_rows(out.logits);
        return out;
    }

} // namespace gssc::anchor
