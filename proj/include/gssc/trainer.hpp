/* SPDX-FileCopyrightText: 2026 GaussianSSC Authors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include "gssc/adam.hpp"
#include "gssc/config.hpp"
#include "gssc/metrics.hpp"

#include <functional>
#include <string>
#include <vector>

namespace gssc::cli {

    /// A synthetic sample with both stage inputs prepared. Stage-2 occupancy is
    /// left empty; callers fill it with a gate.
    struct PreparedScene {
        std::uint64_t seed = 0;
        synth::SyntheticSample sample;
        std::vector<std::uint8_t> known;  // label != UNKNOWN
        anchor::Stage1Input stage1;
        refine::Stage2Input stage2;
    };

    struct SceneSuite {
        std::vector<PreparedScene> train;
        std::vector<PreparedScene> heldout;
    };

    PreparedScene prepare_scene(std::uint64_t seed, const RunConfig& cfg);

    /// Train scenes use seed*1000 + i, held-out scenes seed*1000 + 100 + i.
    SceneSuite build_suite(const RunConfig& cfg);

    struct Stage1Model {
        anchor::Stage1Config cfg;
        ParamStore store;
        anchor::Stage1Params params;
    };

    struct Stage2Model {
        refine::Stage2Config cfg;
        ParamStore store;
        refine::Stage2Params params;
    };

    /// Parameters drawn from Rng(seed).
    Stage1Model make_stage1_model(const RunConfig& cfg);
    Stage2Model make_stage2_model(const RunConfig& cfg);

    std::vector<std::uint8_t> predict_occupancy(const Stage1Model& model, const PreparedScene& scene);
    std::vector<std::uint8_t> predict_semantics(const Stage2Model& model, const PreparedScene& scene,
                                                const std::vector<std::uint8_t>& gate);

    /// Stage-2 gate of a scene: ground truth, or the stage-1 prediction when a
    /// gate model is given.
    std::vector<std::uint8_t> stage2_gate(const PreparedScene& scene, const Stage1Model* gate_model);

    metrics::Report evaluate_stage1(const Stage1Model& model, const std::vector<PreparedScene>& scenes);
    metrics::Report evaluate_stage2(const Stage2Model& model, const std::vector<PreparedScene>& scenes,
                                    const Stage1Model* gate_model);

    using LogSink = std::function<void(const std::string&)>;

    struct TrainResult {
        metrics::Report heldout;          // after the last step
        std::vector<double> losses;       // one per step
        std::vector<std::string> metric_lines;
        int steps = 0;
        double seconds = 0.0;
    };

    /// Adam over the training suite, one scene per step in cyclic order. Logs a
    /// held-out metric record every eval_interval steps and after the last step.
    TrainResult train_stage1(const RunConfig& cfg, const SceneSuite& suite, Stage1Model& model,
                             const LogSink& log = {});
    TrainResult train_stage2(const RunConfig& cfg, const SceneSuite& suite, Stage2Model& model,
                             const Stage1Model* gate_model, const LogSink& log = {});

    /// Seed used by the negative sampler at a given step.
    std::uint64_t step_seed(std::uint64_t seed, std::int64_t step);

} // namespace gssc::cli
