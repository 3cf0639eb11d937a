/* SPDX-FileCopyrightText: 2026 GaussianSSC Authors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#include "gssc/gradcheck_suite.hpp"
#include "gssc/anchoring.hpp"
#include "gssc/error.hpp"
#include "gssc/losses.hpp"
#include "gssc/ops.hpp"
#include "gssc/refinement.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

namespace gssc::cli {

    using anchor::Stage1Config;
    using anchor::Stage1Input;
    using refine::Stage2Config;
    using refine::Stage2Input;
    using geom::VoxelGridSpec;
    using geom::VoxelIndex;
    using triplane::PlaneKind;

    namespace {

        using V = std::span<const Var>;
        using Wrap = std::function<Var(Var)>;

        struct Check {
            std::string name;
            double tolerance;
            std::function<GradCheckReport(const Wrap&)> run;
        };

        NdBuffer uniform(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
            NdBuffer b(std::move(shape));
            std::uniform_real_distribution<double> dist(lo, hi);
            for (auto& v : b.storage())
                v = dist(rng);
            return b;
        }

        void randomize(ParamStore& store, std::mt19937_64& rng, double bound) {
            for (auto& v : store.values())
                v = uniform(v.shape(), rng, -bound, bound);
        }

        // Keeps window centres away from the rounding boundary where the window jumps.
        void avoid_half(NdBuffer& mu) {
            for (auto& m : mu.storage())
                if (std::abs(m - std::floor(m) - 0.5) < 0.01)
                    m += 0.1;
        }

        // Keeps extents away from the radius steps at multiples of 1/3.
        NdBuffer plane_theta(std::size_t cells, std::mt19937_64& rng) {
            auto t = uniform({cells, 2}, rng, 0.3, 2.5);
            for (auto& v : t.storage())
                if (std::abs(3.0 * v - std::round(3.0 * v)) < 0.02)
                    v += 0.02;
            return t;
        }

        GradCheckReport worse(const GradCheckReport& a, const GradCheckReport& b) {
            GradCheckReport r = a.max_rel_error >= b.max_rel_error ? a : b;
            r.checked = a.checked + b.checked;
            return r;
        }

        /// grad_check over `draws` random input sets.
        GradCheckReport kernel_check(const DiffKernel& op, const std::vector<Shape>& shapes, double lo, double hi,
                                     std::uint64_t seed, int draws = 3,
                                     const std::function<void(std::vector<NdBuffer>&)>& adjust = {}) {
            std::mt19937_64 rng(seed);
            GradCheckReport acc;
            for (int d = 0; d < draws; ++d) {
                std::vector<NdBuffer> in;
                for (const auto& s : shapes)
                    in.push_back(uniform(s, rng, lo, hi));
                if (adjust)
                    adjust(in);
                acc = worse(acc, grad_check(op, in, 1e-6, seed + static_cast<std::uint64_t>(d)));
            }
            return acc;
        }

        GradCheckReport param_check(const ParamStore& store, const std::function<Var(Graph&)>& f) {
            return grad_check(
                [&](Tape& tape, V vars) {
                    Graph g(tape, store, vars);
                    return f(g);
                },
                store.values());
        }

        std::vector<Check> tensor_checks() {
            struct Case {
                const char* name;
                DiffKernel op;
                std::vector<Shape> shapes;
                double lo = -1.0, hi = 1.0;
            };
            const std::vector<Case> cases{
                {"matmul", [](Tape&, V v) { return ops::matmul(v[0], v[1]); }, {{4, 3}, {3, 5}}},
                {"add", [](Tape&, V v) { return ops::add(v[0], v[1]); }, {{3, 2}, {3, 2}}},
                {"sub", [](Tape&, V v) { return ops::sub(v[0], v[1]); }, {{3, 2}, {3, 2}}},
                {"mul", [](Tape&, V v) { return ops::mul(v[0], v[1]); }, {{3, 2}, {3, 2}}},
                {"scale", [](Tape&, V v) { return ops::scale(v[0], -2.5); }, {{4}}},
                {"add_scalar", [](Tape&, V v) { return ops::add_scalar(v[0], 0.3); }, {{4}}},
                {"add_bias", [](Tape&, V v) { return ops::add_bias(v[0], v[1]); }, {{2, 3, 4}, {4}}},
                {"mul_rows", [](Tape&, V v) { return ops::mul_rows(v[0], v[1]); }, {{5, 3}, {5}}},
                {"concat_cols", [](Tape&, V v) { return ops::concat_cols({v[0], v[1]}); }, {{3, 2}, {3, 4}}},
                {"slice_cols", [](Tape&, V v) { return ops::slice_cols(v[0], 1, 2); }, {{3, 4}}},
                {"reshape", [](Tape&, V v) { return ops::reshape(v[0], {6, 2}); }, {{3, 4}}},
                {"sum", [](Tape&, V v) { return ops::sum(v[0]); }, {{3, 4}}},
                {"mean", [](Tape&, V v) { return ops::mean(v[0]); }, {{3, 4}}},
                {"dot", [](Tape&, V v) { return ops::dot(v[0], NdBuffer::matrix(2, 2, {1, -2, 3, 0.5})); }, {{2, 2}}},
                {"sigmoid", [](Tape&, V v) { return ops::sigmoid(v[0]); }, {{6}}, -4.0, 4.0},
                {"silu", [](Tape&, V v) { return ops::silu(v[0]); }, {{6}}, -4.0, 4.0},
                {"exp", [](Tape&, V v) { return ops::exp(v[0]); }, {{6}}},
                {"log", [](Tape&, V v) { return ops::log(v[0]); }, {{6}}, 0.2, 3.0},
                {"abs", [](Tape&, V v) { return ops::abs(v[0]); }, {{6}}, 0.1, 2.0},
                {"square", [](Tape&, V v) { return ops::square(v[0]); }, {{6}}},
                {"softplus_clamped", [](Tape&, V v) { return ops::softplus_clamped(v[0], 1e-3, 50.0); }, {{6}}, -3.0,
                 3.0},
                {"softmax_rows", [](Tape&, V v) { return ops::softmax_rows(v[0]); }, {{3, 5}}, -2.0, 2.0},
                {"log_softmax_rows", [](Tape&, V v) { return ops::log_softmax_rows(v[0]); }, {{3, 5}}, -2.0, 2.0},
                {"gather_rows", [](Tape&, V v) { return ops::gather_rows(v[0], {2, 0, 2, 1, 2}); }, {{3, 4}}},
                {"scatter_add_rows", [](Tape&, V v) { return ops::scatter_add_rows(v[0], {1, 3, 1, 0}, v[1]); },
                 {{4, 2}, {4, 2}}},
                {"scatter_add",
                 [](Tape&, V v) {
                     const std::vector<ops::Cell> cells{{0, 1}, {2, 2}, {0, 1}};
                     return ops::scatter_add(v[0], cells, v[1]);
                 },
                 {{3, 3, 2}, {3, 2}}},
                {"sample_bilinear", [](Tape&, V v) { return ops::sample_bilinear(v[0], v[1]); }, {{4, 5, 3}, {6, 2}},
                 0.05, 2.95},
                {"group_weighted_sum", [](Tape&, V v) { return ops::group_weighted_sum(v[0], v[1]); },
                 {{6, 3}, {2, 3}}},
                {"weighted_sum",
                 [](Tape&, V v) {
                     return ops::weighted_sum(
                         {NdBuffer::matrix(2, 2, {1, 2, 3, 4}), NdBuffer::matrix(2, 2, {-1, 0, 5, 2})}, v[0]);
                 },
                 {{2}}},
            };
            std::vector<Check> out;
            std::uint64_t seed = 100;
            for (const auto& c : cases) {
                out.push_back({std::string("tensor.") + c.name, kOpTolerance, [c, seed](const Wrap& wrap) {
                                   return kernel_check([&](Tape& t, V v) { return wrap(c.op(t, v)); }, c.shapes, c.lo,
                                                       c.hi, seed);
                               }});
                ++seed;
            }
            return out;
        }

        std::vector<Check> nn_checks() {
            std::vector<Check> out;
            out.push_back({"nn.linear", kOpTolerance, [](const Wrap& wrap) {
                               ParamStore store;
                               Rng rng(1);
                               auto l = make_linear(store, "l", 3, 4, rng);
                               std::mt19937_64 r(2);
                               randomize(store, r, 0.8);
                               const auto x = uniform({5, 3}, r);
                               auto rep = param_check(store, [&](Graph& g) { return wrap(apply(g, l, g.constant(x))); });
                               return worse(rep, grad_check(
                                                     [&](Tape& t, V v) {
                                                         Graph g(t, store);
                                                         return wrap(apply(g, l, v[0]));
                                                     },
                                                     std::vector<NdBuffer>{x}));
                           }});
            out.push_back({"nn.mlp", kOpTolerance, [](const Wrap& wrap) {
                               ParamStore store;
                               Rng rng(3);
                               auto m = make_mlp(store, "m", 3, 5, 2, rng);
                               std::mt19937_64 r(4);
                               randomize(store, r, 0.8);
                               const auto x = uniform({4, 3}, r);
                               auto rep = param_check(store, [&](Graph& g) { return wrap(apply(g, m, g.constant(x))); });
                               return worse(rep, grad_check(
                                                     [&](Tape& t, V v) {
                                                         Graph g(t, store);
                                                         return wrap(apply(g, m, v[0]));
                                                     },
                                                     std::vector<NdBuffer>{x}));
                           }});
            return out;
        }

        const VoxelGridSpec kTinyGrid{{0, 0, 0}, {4, 3, 2}, 0.5};
        constexpr std::size_t kD = 3;

        std::vector<NdBuffer> random_planes(const VoxelGridSpec& grid, std::size_t d, std::mt19937_64& rng) {
            std::vector<NdBuffer> planes;
            for (auto k : triplane::kPlanes) {
                const auto e = triplane::plane_extent(grid, k);
                planes.push_back(uniform({static_cast<std::size_t>(e[0]), static_cast<std::size_t>(e[1]), d}, rng));
            }
            return planes;
        }

        triplane::TriplaneSet bind_planes(Graph& g, const VoxelGridSpec& grid, std::size_t d, V v) {
            auto tri = triplane::empty_triplane(g, grid, d);
            for (int p = 0; p < 3; ++p)
                tri.planes[p] = v[p];
            return tri;
        }

        std::vector<Check> triplane_checks() {
            std::vector<Check> out;
            out.push_back({"triplane.plane_codes", kOpTolerance, [](const Wrap& wrap) {
                               ParamStore store;
                               Rng rng(5);
                               auto emb = triplane::make_axis_embeddings(store, "emb", kTinyGrid, 2, kD, rng);
                               std::mt19937_64 r(6);
                               randomize(store, r, 0.8);
                               return param_check(store, [&](Graph& g) {
                                   return wrap(triplane::plane_codes(g, emb, kTinyGrid, PlaneKind::HD));
                               });
                           }});
            out.push_back({"triplane.scatter_queries", kOpTolerance, [](const Wrap& wrap) {
                               ParamStore store;
                               Rng rng(7);
                               auto emb = triplane::make_axis_embeddings(store, "emb", kTinyGrid, 2, kD, rng);
                               auto sc = triplane::make_scatter_params(store, "scatter", 2, kD, kD, rng);
                               std::mt19937_64 r(8);
                               randomize(store, r, 0.8);
                               const std::vector<VoxelIndex> idx{{0, 0, 0}, {0, 0, 1}, {3, 2, 1}};
                               const auto feats = uniform({3, 2}, r);
                               return param_check(store, [&](Graph& g) {
                                   auto tri = triplane::count_normalize(triplane::scatter_queries(
                                       g, triplane::empty_triplane(g, kTinyGrid, kD), sc, emb, idx, g.constant(feats)));
                                   return wrap(ops::concat_cols({ops::reshape(tri.planes[0], {1, 12 * kD}),
                                                                 ops::reshape(tri.planes[1], {1, 8 * kD}),
                                                                 ops::reshape(tri.planes[2], {1, 6 * kD})}));
                               });
                           }});
            out.push_back({"triplane.refine_plane", kOpTolerance, [](const Wrap& wrap) {
                               ParamStore store;
                               Rng rng(9);
                               auto rp = triplane::make_plane_refine(store, "refine", kD, rng);
                               std::mt19937_64 r(10);
                               randomize(store, r, 0.8);
                               const auto plane = uniform({3, 4, kD}, r);
                               auto rep = param_check(
                                   store, [&](Graph& g) { return wrap(triplane::refine_plane(g, g.constant(plane), rp)); });
                               return worse(rep, grad_check(
                                                     [&](Tape& t, V v) {
                                                         Graph g(t, store);
                                                         return wrap(triplane::refine_plane(g, v[0], rp));
                                                     },
                                                     std::vector<NdBuffer>{plane}));
                           }});
            out.push_back({"triplane.deform_sample_attend", kOpTolerance, [](const Wrap& wrap) {
                               ParamStore store;
                               Rng rng(11);
                               auto p = triplane::make_deform_attn(store, "attn", kD, 2, kD, 4, rng);
                               std::mt19937_64 r(12);
                               randomize(store, r, 0.6);
                               const auto target = uniform({5, 5, 2}, r);
                               const auto q = uniform({4, kD}, r);
                               const auto refs = uniform({4, 2}, r, 0.6, 3.4);
                               auto rep = param_check(store, [&](Graph& g) {
                                   return wrap(triplane::deform_sample_attend(g, g.constant(q), g.constant(refs),
                                                                              g.constant(target), p));
                               });
                               return worse(rep, grad_check(
                                                     [&](Tape& t, V v) {
                                                         Graph g(t, store);
                                                         return wrap(triplane::deform_sample_attend(g, v[0], v[1], v[2], p));
                                                     },
                                                     std::vector<NdBuffer>{q, refs, target}));
                           }});
            out.push_back({"triplane.gather_merge", kOpTolerance, [](const Wrap& wrap) {
                               ParamStore store;
                               Rng rng(13);
                               auto merge = triplane::make_merge(store, "merge", kD, 4, kD, rng);
                               std::mt19937_64 r(14);
                               randomize(store, r, 0.8);
                               const auto planes = random_planes(kTinyGrid, kD, r);
                               const std::vector<VoxelIndex> voxels{{0, 0, 0}, {3, 2, 1}, {1, 2, 0}};
                               auto rep = grad_check(
                                   [&](Tape& t, V v) {
                                       Graph g(t, store);
                                       return wrap(triplane::gather_merge(g, bind_planes(g, kTinyGrid, kD, v), merge, voxels));
                                   },
                                   planes);
                               return worse(rep, param_check(store, [&](Graph& g) {
                                                auto tri = triplane::empty_triplane(g, kTinyGrid, kD);
                                                for (int p = 0; p < 3; ++p)
                                                    tri.planes[p] = g.constant(planes[p]);
                                                return wrap(triplane::gather_merge(g, tri, merge, voxels));
                                            }));
                           }});
            return out;
        }

        std::vector<Check> anchoring_checks() {
            std::vector<Check> out;
            out.push_back({"anchoring.fuse_levels", kOpTolerance, [](const Wrap& wrap) {
                               std::mt19937_64 r(15);
                               anchor::FeaturePyramid p{
                                   {uniform({4, 6, 2}, r), uniform({2, 3, 2}, r), uniform({1, 2, 2}, r)}, {4.0, 8.0, 16.0}};
                               return kernel_check(
                                   [&](Tape&, V v) { return wrap(anchor::fuse_levels(p, v[0]).features); }, {{3}}, -1.0,
                                   1.0, 16);
                           }});
            out.push_back({"anchoring.decode_anchor", kOpTolerance, [](const Wrap& wrap) {
                               ParamStore store;
                               Rng rng(17);
                               auto dec = anchor::make_anchor_decoder(store, "a", 4, rng);
                               std::mt19937_64 r(18);
                               store.value(dec.head.weight) = uniform({4, 5}, r, -0.5, 0.5);
                               const auto f = uniform({6, 4}, r);
                               return param_check(store, [&](Graph& g) {
                                   auto a = anchor::decode_anchor(g, dec, g.constant(f));
                                   return wrap(ops::concat_cols({a.delta, a.sigma, ops::reshape(a.alpha, {6, 1})}));
                               });
                           }});
            out.push_back({"anchoring.anchor_weights", kOpTolerance, [](const Wrap& wrap) {
                               return kernel_check(
                                   [&](Tape&, V v) {
                                       return wrap(anchor::anchor_weights(v[0], ops::add_scalar(v[1], 0.6), v[2]));
                                   },
                                   {{5, 2}, {5, 2}, {5}}, 0.2, 2.0, 19, 3, [](std::vector<NdBuffer>& in) {
                                       for (auto& m : in[0].storage())
                                           m *= 2.0;
                                       avoid_half(in[0]);
                                   });
                           }});
            out.push_back({"anchoring.anchor_aggregate", kOpTolerance, [](const Wrap& wrap) {
                               std::mt19937_64 r(20);
                               GradCheckReport acc;
                               for (int d = 0; d < 3; ++d) {
                                   std::vector<NdBuffer> in{uniform({6, 7, 2}, r), uniform({5, 2}, r, 0.6, 5.4),
                                                            uniform({5, 2}, r, 0.4, 2.5), uniform({5}, r, 0.2, 1.0)};
                                   avoid_half(in[1]);
                                   acc = worse(acc, grad_check(
                                                        [&](Tape&, V v) {
                                                            return wrap(anchor::anchor_aggregate(v[0], v[1], v[2], v[3]));
                                                        },
                                                        in, 1e-6, d));
                               }
                               return acc;
                           }});
            out.push_back({"anchoring.gated_fuse", kOpTolerance, [](const Wrap& wrap) {
                               ParamStore store;
                               Rng rng(21);
                               auto gp = anchor::make_gate(store, "g", 3, 4, rng);
                               std::mt19937_64 r(22);
                               randomize(store, r, 0.7);
                               const auto f = uniform({5, 4}, r);
                               const auto a = uniform({5, 3}, r);
                               const auto mask = NdBuffer::vector({1, 1, 0, 1, 1});
                               auto rep = param_check(store, [&](Graph& g) {
                                   return wrap(anchor::gated_fuse(g, g.constant(f), g.constant(a), g.constant(mask), gp));
                               });
                               return worse(rep, grad_check(
                                                     [&](Tape& t, V v) {
                                                         Graph g(t, store);
                                                         return wrap(anchor::gated_fuse(g, v[0], v[1], g.constant(mask), gp));
                                                     },
                                                     std::vector<NdBuffer>{f, a}));
                           }});
            for (int dil : {1, 2})
                out.push_back({fmt::format("anchoring.conv3d_d{}", dil), kOpTolerance, [dil](const Wrap& wrap) {
                                   const VoxelGridSpec grid{{0, 0, 0}, {4, 3, 3}, 1.0};
                                   const std::size_t c = 2, n = grid.voxel_count();
                                   return kernel_check(
                                       [&](Tape&, V v) { return wrap(anchor::conv3d(v[0], v[1], v[2], grid, dil)); },
                                       {{n, c}, {27 * c, c}, {c}}, -1.0, 1.0, 23 + static_cast<std::uint64_t>(dil), 1);
                               }});
            out.push_back({"anchoring.occupancy_head", kOpTolerance, [](const Wrap& wrap) {
                               const VoxelGridSpec grid{{0, 0, 0}, {3, 3, 2}, 1.0};
                               ParamStore store;
                               Rng rng(26);
                               auto hp = anchor::make_occ_head(store, "h", 3, 2, rng);
                               std::mt19937_64 r(27);
                               randomize(store, r, 0.5);
                               const auto field = uniform({grid.voxel_count(), 3}, r);
                               auto rep = param_check(store, [&](Graph& g) {
                                   return wrap(anchor::occupancy_head(g, g.constant(field), grid, hp));
                               });
                               return worse(rep, grad_check(
                                                     [&](Tape& t, V v) {
                                                         Graph g(t, store);
                                                         return wrap(anchor::occupancy_head(g, v[0], grid, hp));
                                                     },
                                                     std::vector<NdBuffer>{field}));
                           }});
            return out;
        }

        std::vector<Check> refinement_checks() {
            std::vector<Check> out;
            out.push_back({"refinement.occupancy_gate", kOpTolerance, [](const Wrap& wrap) {
                               const std::vector<std::uint8_t> mask{1, 0, 1, 0, 0, 1};
                               return kernel_check([&](Tape&, V v) { return wrap(refine::occupancy_gate(v[0], mask)); },
                                                   {{6, 3}}, -1.0, 1.0, 28);
                           }});
            out.push_back({"refinement.voxel_tokens", kOpTolerance, [](const Wrap& wrap) {
                               ParamStore store;
                               Rng rng(29);
                               auto tp = refine::make_tokens(store, "tok", kTinyGrid, kD, rng);
                               return param_check(store,
                                                  [&](Graph& g) { return wrap(refine::voxel_tokens(g, tp, kTinyGrid)); });
                           }});
            out.push_back({"refinement.condition_tokens", kOpTolerance, [](const Wrap& wrap) {
                               const VoxelGridSpec grid{{0, 0, 0}, {4, 4, 2}, 1.0};
                               std::mt19937_64 r(30);
                               geom::CameraIntrinsics intr{30, 30, 16, 12, 32, 24};
                               const auto proj = anchor::project_grid(
                                   grid, intr, geom::CameraPose::look_at({2, -1, 4}, {2, 3, 0}), 4.0);
                               const auto fmap = uniform({6, 8, 3}, r);
                               std::vector<std::uint8_t> mask(grid.voxel_count());
                               for (auto& m : mask)
                                   m = r() % 2;
                               ParamStore store;
                               Rng rng(31);
                               auto attn = triplane::make_deform_attn(store, "cond", 3, 3, 3, 2, rng);
                               const auto tokens = uniform({grid.voxel_count(), 3}, r);
                               auto rep = param_check(store, [&](Graph& g) {
                                   auto gated = refine::occupancy_gate(g.constant(tokens), mask);
                                   return wrap(refine::condition_tokens(g, gated, mask, proj, g.constant(fmap), attn));
                               });
                               return worse(rep, grad_check(
                                                     [&](Tape& t, V v) {
                                                         Graph g(t, store);
                                                         auto gated = refine::occupancy_gate(v[0], mask);
                                                         return wrap(refine::condition_tokens(g, gated, mask, proj, v[1], attn));
                                                     },
                                                     std::vector<NdBuffer>{tokens, fmap}));
                           }});
            out.push_back({"refinement.decode_plane_gaussians", kOpTolerance, [](const Wrap& wrap) {
                               ParamStore store;
                               Rng rng(32);
                               auto dec = refine::make_plane_decoder(store, "dec", 3, rng);
                               std::mt19937_64 r(33);
                               store.value(dec.head.weight) = uniform(store.value(dec.head.weight).shape(), r);
                               const auto x = uniform({4, 3}, r);
                               return param_check(store, [&](Graph& g) {
                                   auto f = refine::decode_plane_gaussians(g, dec, g.constant(x));
                                   return wrap(ops::concat_cols(
                                       {f.theta[0], f.theta[1], f.theta[2], ops::reshape(f.alpha, {4, 1})}));
                               });
                           }});
            out.push_back({"refinement.fiber_mean", kOpTolerance, [](const Wrap& wrap) {
                               GradCheckReport acc;
                               for (auto k : triplane::kPlanes)
                                   acc = worse(acc, kernel_check(
                                                        [&](Tape&, V v) { return wrap(refine::fiber_mean(v[0], kTinyGrid, k)); },
                                                        {{kTinyGrid.voxel_count(), 2}}, -1.0, 1.0, 34, 1));
                               return acc;
                           }});
            out.push_back({"refinement.local_gather", kOpTolerance, [](const Wrap& wrap) {
                               std::mt19937_64 r(35);
                               GradCheckReport acc;
                               for (int d = 0; d < 3; ++d) {
                                   const std::vector<NdBuffer> in{uniform({5, 4, 2}, r), plane_theta(20, r)};
                                   acc = worse(acc, grad_check(
                                                        [&](Tape&, V v) { return wrap(refine::local_gather(v[0], v[1])); },
                                                        in));
                               }
                               return acc;
                           }});
            out.push_back({"refinement.global_aggregate", kOpTolerance, [](const Wrap& wrap) {
                               std::mt19937_64 r(36);
                               GradCheckReport acc;
                               for (int d = 0; d < 3; ++d) {
                                   const std::vector<NdBuffer> in{uniform({4, 5, 2}, r), plane_theta(20, r),
                                                                  uniform({20}, r, 0.05, 1.0)};
                                   acc = worse(acc, grad_check(
                                                        [&](Tape&, V v) {
                                                            return wrap(refine::global_aggregate(v[0], v[1], v[2]));
                                                        },
                                                        in));
                               }
                               return acc;
                           }});
            out.push_back({"refinement.blend", kOpTolerance, [](const Wrap& wrap) {
                               return kernel_check([&](Tape&, V v) { return wrap(refine::blend(v[0], v[1], 0.3)); },
                                                   {{3, 4, 2}, {3, 4, 2}}, -1.0, 1.0, 37);
                           }});
            out.push_back({"refinement.lift_merge", kOpTolerance, [](const Wrap& wrap) {
                               ParamStore store;
                               Rng rng(38);
                               auto merge = triplane::make_merge(store, "lift", kD, 4, 2, rng);
                               std::mt19937_64 r(39);
                               randomize(store, r, 0.8);
                               const auto planes = random_planes(kTinyGrid, kD, r);
                               const auto voxels = triplane::all_voxels(kTinyGrid);
                               return grad_check(
                                   [&](Tape& t, V v) {
                                       Graph g(t, store);
                                       return wrap(refine::lift_merge(g, bind_planes(g, kTinyGrid, kD, v), merge, voxels));
                                   },
                                   planes);
                           }});
            out.push_back({"refinement.semantic_head", kOpTolerance, [](const Wrap& wrap) {
                               ParamStore store;
                               Rng rng(40);
                               auto head = make_linear(store, "head", 3, 4, rng);
                               std::mt19937_64 r(41);
                               randomize(store, r, 0.8);
                               const auto field = uniform({5, 3}, r);
                               auto rep = param_check(store, [&](Graph& g) {
                                   return wrap(refine::semantic_head(g, g.constant(field), head));
                               });
                               return worse(rep, grad_check(
                                                     [&](Tape& t, V v) {
                                                         Graph g(t, store);
                                                         return wrap(refine::semantic_head(g, v[0], head));
                                                     },
                                                     std::vector<NdBuffer>{field}));
                           }});
            return out;
        }

        std::vector<Check> loss_checks() {
            using Mask = std::vector<std::uint8_t>;
            std::vector<Check> out;
            out.push_back({"losses.balanced_bce", kOpTolerance, [](const Wrap& wrap) {
                               const Mask occ{1, 0, 1, 0, 0, 1, 1, 0}, mask{1, 1, 0, 1, 1, 1, 1, 0};
                               return kernel_check(
                                   [&](Tape&, V v) { return wrap(loss::balanced_bce(v[0], occ, mask, {})); }, {{8, 2}},
                                   -3.0, 3.0, 42);
                           }});
            out.push_back({"losses.sigma_reg", kOpTolerance, [](const Wrap& wrap) {
                               return kernel_check([&](Tape&, V v) { return wrap(loss::sigma_reg(v[0], 1.3)); }, {{5, 2}},
                                                   0.3, 3.0, 43);
                           }});
            out.push_back({"losses.delta_reg", kOpTolerance, [](const Wrap& wrap) {
                               return kernel_check([&](Tape&, V v) { return wrap(loss::delta_reg(v[0])); }, {{5, 2}}, -2.0,
                                                   2.0, 44, 3, [](std::vector<NdBuffer>& in) {
                                                       for (auto& x : in[0].storage())
                                                           if (std::abs(x) < 0.05)
                                                               x += 0.1;
                                                   });
                           }});
            out.push_back({"losses.weighted_ce", kOpTolerance, [](const Wrap& wrap) {
                               loss::Stage2LossWeights w;
                               w.class_weights = {0.5, 1.5, 2.0};
                               const Mask y{0, 1, 2, 2, 1, 0}, mask{1, 1, 1, 0, 1, 1};
                               return kernel_check(
                                   [&](Tape&, V v) { return wrap(loss::weighted_ce(v[0], y, mask, w)); }, {{6, 3}}, -2.0,
                                   2.0, 45);
                           }});
            out.push_back({"losses.sem_scal", kOpTolerance, [](const Wrap& wrap) {
                               const Mask y{0, 3, 1, 1, 2, 0, 3}, mask{1, 1, 1, 0, 1, 1, 1};
                               return kernel_check([&](Tape&, V v) { return wrap(loss::sem_scal(v[0], y, mask)); },
                                                   {{7, 4}}, -2.0, 2.0, 46);
                           }});
            out.push_back({"losses.neg_log_ratio", kOpTolerance, [](const Wrap& wrap) {
                               const Mask sel{1, 0, 1, 1};
                               return kernel_check(
                                   [&](Tape&, V v) { return wrap(loss::neg_log_ratio(v[0], v[1], sel)); }, {{4}, {4}},
                                   0.2, 1.5, 47);
                           }});
            return out;
        }

        geom::CameraIntrinsics tiny_intrinsics() { return {45, 45, 24, 18, 48, 36}; }
        geom::CameraPose tiny_pose() { return geom::CameraPose::look_at({3, -1, 5}, {3, 4, 0}); }

        Check stage1_pipeline() {
            return {"pipeline.stage1", kPipelineTolerance, [](const Wrap& wrap) {
                        Stage1Config cfg;
                        cfg.grid = VoxelGridSpec{{0, 0, 0}, {6, 6, 4}, 1.0};
                        cfg.width = 4;
                        cfg.feature_width = 3;
                        cfg.embed_width = 2;
                        cfg.head_width = 2;
                        cfg.image_channels = 3;
                        cfg.levels = 2;
                        std::mt19937_64 r(48);
                        Stage1Input in;
                        in.pyramid.levels = {uniform({9, 12, 3}, r), uniform({5, 6, 3}, r)};
                        in.pyramid.strides = {4.0, 8.0};
                        in.projection = anchor::project_grid(cfg.grid, tiny_intrinsics(), tiny_pose(), 4.0);
                        for (int q = 0; q < 12; ++q)
                            in.query_idx.push_back(
                                {static_cast<int>(r() % 6), static_cast<int>(r() % 6), static_cast<int>(r() % 4)});
                        in.query_features = uniform({12, 3}, r);
                        const std::size_t n = cfg.grid.voxel_count();
                        std::vector<std::uint8_t> occ(n), select(n);
                        for (std::size_t v = 0; v < n; ++v) {
                            occ[v] = r() % 3 == 0;
                            select[v] = r() % 4 != 0;
                        }
                        ParamStore store;
                        Rng rng(49);
                        auto p = anchor::make_stage1(store, cfg, rng);
                        // Anchor offsets large enough to exercise the window, clamp band inactive.
                        store.value(p.decoder.head.weight) =
                            uniform(store.value(p.decoder.head.weight).shape(), r, -0.3, 0.3);
                        const loss::Stage1LossWeights w{0.46, 0.54, 0.1, 0.05, 1.0, 2.0};
                        return param_check(store, [&](Graph& g) {
                            auto out = anchor::stage1_forward(g, cfg, p, in);
                            Var total = loss::balanced_bce(wrap(out.logits), occ, select, w);
                            total = ops::add(total, ops::scale(loss::sigma_reg(out.anchors.sigma, w.sigma0), w.lambda_sigma));
                            return ops::add(total, ops::scale(loss::delta_reg(out.anchors.delta), w.lambda_delta));
                        });
                    }};
        }

        Check stage2_pipeline() {
            return {"pipeline.stage2", kPipelineTolerance, [](const Wrap& wrap) {
                        Stage2Config cfg;
                        cfg.grid = VoxelGridSpec{{0, 0, 0}, {6, 6, 4}, 1.0};
                        cfg.token_width = 3;
                        cfg.width = 4;
                        cfg.embed_width = 2;
                        cfg.image_channels = 3;
                        cfg.levels = 2;
                        cfg.num_classes = 3;
                        cfg.points = 2;
                        std::mt19937_64 r(50);
                        Stage2Input in;
                        in.pyramid.levels = {uniform({9, 12, 3}, r), uniform({5, 6, 3}, r)};
                        in.pyramid.strides = {4.0, 8.0};
                        in.projection = anchor::project_grid(cfg.grid, tiny_intrinsics(), tiny_pose(), 4.0);
                        in.plane_projection = refine::project_planes(cfg.grid, tiny_intrinsics(), tiny_pose(), 4.0);
                        const std::size_t n = cfg.grid.voxel_count();
                        std::vector<std::uint8_t> labels(n), known(n);
                        in.occupancy.resize(n);
                        for (std::size_t v = 0; v < n; ++v) {
                            in.occupancy[v] = r() % 5 < 2;
                            labels[v] = in.occupancy[v] ? static_cast<std::uint8_t>(1 + r() % 2) : 0;
                            known[v] = r() % 6 != 0;
                        }
                        ParamStore store;
                        Rng rng(51);
                        auto p = refine::make_stage2(store, cfg, rng);
                        // Spread the extents away from the clamp band edges.
                        store.value(p.decoder.head.weight) =
                            uniform(store.value(p.decoder.head.weight).shape(), r, -0.3, 0.3);
                        loss::Stage2LossWeights w;
                        w.class_weights = {0.5, 1.0, 2.0};
                        return param_check(store, [&](Graph& g) {
                            auto out = refine::stage2_forward(g, cfg, p, in);
                            Var logits = wrap(out.logits);
                            return ops::add(ops::scale(loss::weighted_ce(logits, labels, known, w), w.lambda_ce),
                                            ops::scale(loss::sem_scal(logits, labels, known), w.lambda_sem));
                        });
                    }};
        }

        std::vector<Check> all_checks() {
            std::vector<Check> out;
            for (auto group : {tensor_checks(), nn_checks(), triplane_checks(), anchoring_checks(),
                               refinement_checks(), loss_checks()})
                for (auto& c : group)
                    out.push_back(std::move(c));
            out.push_back(stage1_pipeline());
            out.push_back(stage2_pipeline());
            return out;
        }

    } // namespace

    Var skew_backward(Var x, double factor) {
        return x.tape->record("skew_backward", x.value(), {x}, [x, factor](Tape& t, const NdBuffer& g) {
            if (NdBuffer* gx = t.grad_slot(x))
                for (std::size_t i = 0; i < g.size(); ++i)
                    (*gx)[i] += factor * g[i];
        });
    }

    std::vector<std::string> gradcheck_names() {
        std::vector<std::string> names;
        for (const auto& c : all_checks())
            names.push_back(c.name);
        return names;
    }

    std::vector<CheckResult> run_gradcheck_suite(const SuiteOptions& options,
                                                 const std::function<void(const CheckResult&)>& on_result) {
        const auto checks = all_checks();
        if (!options.corrupt.empty() &&
            std::none_of(checks.begin(), checks.end(), [&](const Check& c) { return c.name == options.corrupt; }))
            throw ConfigError(fmt::format("unknown gradient check '{}'", options.corrupt));
        std::vector<CheckResult> results;
        for (const auto& c : checks) {
            if (!options.filter.empty() && c.name.find(options.filter) == std::string::npos)
                continue;
            const bool corrupt = c.name == options.corrupt;
            const Wrap wrap = [corrupt](Var v) { return corrupt ? skew_backward(v, 2.0) : v; };
            CheckResult r;
            r.name = c.name;
            r.tolerance = c.tolerance;
            const auto t0 = std::chrono::steady_clock::now();
            try {
                const auto rep = c.run(wrap);
                r.max_rel_error = rep.max_rel_error;
                r.checked = rep.checked;
                r.worst = fmt::format("input {} element {}: analytic {:.9g}, numeric {:.9g}", rep.worst_input,
                                      rep.worst_element, rep.analytic, rep.numeric);
            } catch (const std::exception& e) {
                r.error = e.what();
            }
            r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            if (on_result)
                on_result(r);
            results.push_back(std::move(r));
        }
        return results;
    }

    std::string to_json(const CheckResult& r) {
        nlohmann::ordered_json j;
        j["check"] = r.name;
        j["passed"] = r.passed();
        j["max_rel_error"] = r.max_rel_error;
        j["tolerance"] = r.tolerance;
        j["checked"] = r.checked;
        j["worst"] = r.worst;
        if (!r.error.empty())
            j["error"] = r.error;
        j["seconds"] = r.seconds;
        return j.dump();
    }

} // namespace gssc::cli
