/* SPDX-FileCopyrightText: 2026 GaussianSSC Authors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#include "gssc/trainer.hpp"
#include "gssc/error.hpp"
#include "gssc/ops.hpp"

#include <fmt/format.h>

#include <chrono>

namespace gssc::cli {

    namespace {

        NdBuffer query_features(const std::vector<triplane::VoxelQuery>& queries, std::size_t channels) {
            NdBuffer out({std::max<std::size_t>(queries.size(), 1), channels}, 0.0);
            for (std::size_t i = 0; i < queries.size(); ++i) {
                if (queries[i].feature.size() != channels)
                    throw DimensionError(fmt::format("query {} has {} features, expected {}", i,
                                                     queries[i].feature.size(), channels));
                std::copy(queries[i].feature.begin(), queries[i].feature.end(), out.ptr() + i * channels);
            }
            return out;
        }

        std::vector<std::uint8_t> argmax_rows(const NdBuffer& logits) {
            const std::size_t n = logits.rows(), c = logits.cols();
            std::vector<std::uint8_t> out(n);
            for (std::size_t i = 0; i < n; ++i) {
                const double* row = logits.ptr() + i * c;
                out[i] = static_cast<std::uint8_t>(std::max_element(row, row + c) - row);
            }
            return out;
        }

        // Binary labels with UNKNOWN carried over, for occupancy confusion.
        std::vector<std::uint8_t> occupancy_truth(const PreparedScene& s) {
            std::vector<std::uint8_t> out(s.known.size());
            for (std::size_t v = 0; v < out.size(); ++v)
                out[v] = s.known[v] ? s.sample.volume.occupancy[v] : geom::kUnknownLabel;
            return out;
        }

        double seconds_since(std::chrono::steady_clock::time_point t0) {
            return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        }

        OptimizerState make_optimizer(const RunConfig& cfg) {
            OptimizerState st;
            st.lr = cfg.optimizer.lr;
            st.beta1 = cfg.optimizer.beta1;
            st.beta2 = cfg.optimizer.beta2;
            st.eps = cfg.optimizer.eps;
            return st;
        }

        void emit(TrainResult& r, const LogSink& log, std::string line) {
            if (log)
                log(line);
            r.metric_lines.push_back(std::move(line));
        }

    } // namespace

    std::uint64_t step_seed(std::uint64_t seed, std::int64_t step) {
        // splitmix64 finalizer over (seed, step)
        std::uint64_t z = seed * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(step) + 0x632be59bd9b4e019ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    PreparedScene prepare_scene(std::uint64_t seed, const RunConfig& cfg) {
        PreparedScene s;
        s.seed = seed;
        s.sample = synth::make_sample(seed, sample_config(cfg));
        const auto& grid = s.sample.volume.grid;
        const auto& cam = s.sample.camera;
        const double stride = cfg.render.strides.front();
        s.known.resize(grid.voxel_count());
        for (std::size_t v = 0; v < s.known.size(); ++v)
            s.known[v] = s.sample.volume.known(v) ? 1 : 0;

        s.stage1.pyramid = s.sample.pyramid;
        s.stage1.projection = anchor::project_grid(grid, cam.intr, cam.pose, stride);
        for (const auto& q : s.sample.queries)
            s.stage1.query_idx.push_back(q.idx);
        s.stage1.query_features = query_features(s.sample.queries, cfg.render.channels);

        s.stage2.pyramid = s.sample.pyramid;
        s.stage2.projection = s.stage1.projection;
        s.stage2.plane_projection = refine::project_planes(grid, cam.intr, cam.pose, stride);
        return s;
    }

    SceneSuite build_suite(const RunConfig& cfg) {
        cfg.validate();
        SceneSuite suite;
        for (int i = 0; i < cfg.train_scenes; ++i)
            suite.train.push_back(prepare_scene(cfg.seed * 1000 + static_cast<std::uint64_t>(i), cfg));
        for (int i = 0; i < cfg.heldout_scenes; ++i)
            suite.heldout.push_back(prepare_scene(cfg.seed * 1000 + 100 + static_cast<std::uint64_t>(i), cfg));
        return suite;
    }

    Stage1Model make_stage1_model(const RunConfig& cfg) {
        Stage1Model m;
        m.cfg = stage1_config(cfg);
        Rng rng(cfg.seed);
        m.params = anchor::make_stage1(m.store, m.cfg, rng);
        return m;
    }

    Stage2Model make_stage2_model(const RunConfig& cfg) {
        Stage2Model m;
        m.cfg = stage2_config(cfg);
        Rng rng(cfg.seed);
        m.params = refine::make_stage2(m.store, m.cfg, rng);
        return m;
    }

    std::vector<std::uint8_t> predict_occupancy(const Stage1Model& model, const PreparedScene& scene) {
        Tape tape;
        Graph g(tape, model.store);
        const auto out = anchor::stage1_forward(g, model.cfg, model.params, scene.stage1);
        return argmax_rows(out.logits.value());
    }

    std::vector<std::uint8_t> predict_semantics(const Stage2Model& model, const PreparedScene& scene,
                                                const std::vector<std::uint8_t>& gate) {
        Tape tape;
        Graph g(tape, model.store);
        auto in = scene.stage2;
        in.occupancy = gate;
        const auto out = refine::stage2_forward(g, model.cfg, model.params, in);
        return refine::predict_labels(out.logits.value(), gate);
    }

    std::vector<std::uint8_t> stage2_gate(const PreparedScene& scene, const Stage1Model* gate_model) {
        if (gate_model)
            return predict_occupancy(*gate_model, scene);
        return scene.sample.volume.occupancy;
    }

    metrics::Report evaluate_stage1(const Stage1Model& model, const std::vector<PreparedScene>& scenes) {
        metrics::Confusion conf(2);
        for (const auto& s : scenes)
            conf.add(predict_occupancy(model, s), occupancy_truth(s));
        return metrics::occupancy_report(conf);
    }

    metrics::Report evaluate_stage2(const Stage2Model& model, const std::vector<PreparedScene>& scenes,
                                    const Stage1Model* gate_model) {
        metrics::Confusion conf(model.cfg.num_classes);
        for (const auto& s : scenes)
            conf.add(predict_semantics(model, s, stage2_gate(s, gate_model)), s.sample.volume.labels);
        return metrics::semantic_report(conf);
    }

    TrainResult train_stage1(const RunConfig& cfg, const SceneSuite& suite, Stage1Model& model, const LogSink& log) {
        if (suite.train.empty() || suite.heldout.empty())
            throw ConfigError("training needs at least one train and one held-out scene");
        const auto t0 = std::chrono::steady_clock::now();
        TrainResult r;
        OptimizerState opt = make_optimizer(cfg);
        for (int step = 1; step <= cfg.steps; ++step) {
            const auto& scene = suite.train[static_cast<std::size_t>(step - 1) % suite.train.size()];
            const auto& occ = scene.sample.volume.occupancy;
            Tape tape;
            Graph g(tape, model.store);
            const auto out = anchor::stage1_forward(g, model.cfg, model.params, scene.stage1);
            const auto select = cfg.negative_sampling
                                    ? loss::negative_sample(occ, scene.known, cfg.stage1_loss.neg_ratio,
                                                            step_seed(cfg.seed, step))
                                    : scene.known;
            Var total = loss::balanced_bce(out.logits, occ, select, cfg.stage1_loss);
            if (model.cfg.mode == anchor::AnchorMode::Gaussian && out.anchors.sigma.valid()) {
                if (cfg.stage1_loss.lambda_sigma > 0.0)
                    total = ops::add(total, ops::scale(loss::sigma_reg(out.anchors.sigma, cfg.stage1_loss.sigma0),
                                                       cfg.stage1_loss.lambda_sigma));
                if (cfg.stage1_loss.lambda_delta > 0.0)
                    total = ops::add(total, ops::scale(loss::delta_reg(out.anchors.delta), cfg.stage1_loss.lambda_delta));
            }
            r.losses.push_back(total.value()[0]);
            tape.backward(total);
            auto grads = g.gradients();
            adam_step(model.store.values(), grads, opt);
            r.steps = step;
            if (step % cfg.eval_interval == 0 || step == cfg.steps) {
                r.heldout = evaluate_stage1(model, suite.heldout);
                emit(r, log, metrics::json_line(step, "heldout", r.heldout));
            }
        }
        if (cfg.steps == 0) {
            r.heldout = evaluate_stage1(model, suite.heldout);
            emit(r, log, metrics::json_line(0, "heldout", r.heldout));
        }
        r.seconds = seconds_since(t0);
        return r;
    }

    TrainResult train_stage2(const RunConfig& cfg, const SceneSuite& suite, Stage2Model& model,
                             const Stage1Model* gate_model, const LogSink& log) {
        if (suite.train.empty() || suite.heldout.empty())
            throw ConfigError("training needs at least one train and one held-out scene");
        if (!cfg.gt_occupancy && !gate_model)
            throw ConfigError("config key 'stage1_checkpoint': stage 2 without gt_occupancy needs a stage-1 model");
        const auto t0 = std::chrono::steady_clock::now();
        // Gates are fixed during stage-2 training.
        std::vector<std::vector<std::uint8_t>> gates;
        for (const auto& s : suite.train)
            gates.push_back(stage2_gate(s, gate_model));
        TrainResult r;
        OptimizerState opt = make_optimizer(cfg);
        for (int step = 1; step <= cfg.steps; ++step) {
            const std::size_t k = static_cast<std::size_t>(step - 1) % suite.train.size();
            const auto& scene = suite.train[k];
            auto in = scene.stage2;
            in.occupancy = gates[k];
            Tape tape;
            Graph g(tape, model.store);
            const auto out = refine::stage2_forward(g, model.cfg, model.params, in);
            const auto& labels = scene.sample.volume.labels;
            Var total = ops::scale(loss::weighted_ce(out.logits, labels, scene.known, cfg.stage2_loss),
                                   cfg.stage2_loss.lambda_ce);
            if (cfg.stage2_loss.lambda_sem > 0.0)
                total = ops::add(total, ops::scale(loss::sem_scal(out.logits, labels, scene.known),
                                                   cfg.stage2_loss.lambda_sem));
            r.losses.push_back(total.value()[0]);
            tape.backward(total);
            auto grads = g.gradients();
            adam_step(model.store.values(), grads, opt);
            r.steps = step;
            if (step % cfg.eval_interval == 0 || step == cfg.steps) {
                r.heldout = evaluate_stage2(model, suite.heldout, gate_model);
                emit(r, log, metrics::json_line(step, "heldout", r.heldout));
            }
        }
        if (cfg.steps == 0) {
            r.heldout = evaluate_stage2(model, suite.heldout, gate_model);
            emit(r, log, metrics::json_line(0, "heldout", r.heldout));
        }
        r.seconds = seconds_since(t0);
        return r;
    }

} // namespace gssc::cli
