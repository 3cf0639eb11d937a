/* SPDX-FileCopyrightText: 2026 GaussianSSC Authors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include "gssc/anchoring.hpp"
#include "gssc/losses.hpp"
#include "gssc/refinement.hpp"
#include "gssc/synth.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace gssc::cli {

    struct OptimizerConfig {
        double lr = 1e-3;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
    };

    /// Everything a run needs. Every field has a default and a config key;
    /// config_reference() lists them.
    struct RunConfig {
        std::uint64_t seed = 0;
        int threads = 1;
        int stage = 1;

        std::array<int, 3> grid_dims{64, 64, 8};
        double voxel_size = 0.2;
        geom::CameraIntrinsics intr = synth::desk_intrinsics();

        int num_classes = 4;
        int train_scenes = 8;
        int heldout_scenes = 2;
        synth::RenderConfig render;
        synth::QueryConfig queries;

        std::size_t width = 16;        // d
        std::size_t token_width = 16;  // D_tok
        std::size_t embed_width = 8;   // d_e
        std::size_t head_width = 8;
        int points = 4;
        int window_radius = anchor::kWindowRadius;
        double sigma_lo = anchor::kSigmaLo;
        double sigma_hi = anchor::kSigmaHi;
        anchor::AnchorMode anchor_mode = anchor::AnchorMode::Gaussian;
        double beta = 0.5;
        int r_max = refine::kMaxRadius;

        loss::Stage1LossWeights stage1_loss;
        bool negative_sampling = true;
        loss::Stage2LossWeights stage2_loss;

        OptimizerConfig optimizer;
        int steps = 2000;
        int eval_interval = 100;

        bool gt_occupancy = true;  // stage 2 gates with ground truth instead of a stage-1 checkpoint
        std::string stage1_checkpoint;
        std::string out_dir = "out";

        /// Throws ConfigError naming the offending key.
        void validate() const;
    };

    /// Parses `key = value` lines; `#` starts a comment. Unknown or repeated
    /// keys and malformed values throw ConfigError naming the key.
    RunConfig parse_config(std::string_view text);

    /// Throws IoError when the file cannot be read.
    RunConfig load_config(const std::filesystem::path& path);

    /// Canonical text form; parse_config(to_text(c)) reproduces c.
    std::string to_text(const RunConfig& cfg);

    /// One line per key: name, default and meaning.
    std::string config_reference();

    geom::VoxelGridSpec grid_spec(const RunConfig& cfg);
    synth::SampleConfig sample_config(const RunConfig& cfg);
    anchor::Stage1Config stage1_config(const RunConfig& cfg);
    refine::Stage2Config stage2_config(const RunConfig& cfg);

} // namespace gssc::cli
