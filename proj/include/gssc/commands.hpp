/* SPDX-FileCopyrightText: 2026 GaussianSSC Authors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include "gssc/trainer.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace gssc::cli {

    enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitConfig = 2, kExitIo = 3 };

    /// Parameters flattened in store order into a rank-1 f64 GsscFile.
    void save_checkpoint(const std::filesystem::path& path, const ParamStore& store);
    /// Throws IoError when the file is missing or unreadable and ConfigError when
    /// its size does not match the model the config describes.
    void load_checkpoint(const std::filesystem::path& path, ParamStore& store);

    /// Stage-1 gate model for stage 2, or nothing when gt_occupancy is set.
    /// A configured but missing checkpoint is a ConfigError.
    std::optional<Stage1Model> load_gate_model(const RunConfig& cfg);

    struct AblationRow {
        std::string name;
        metrics::Report report;
        int stage = 1;
    };

    /// Stage-1 rows {point, gaussian} x {negative sampling on, off}.
    std::vector<AblationRow> run_anchor_ablation(const RunConfig& cfg, const SceneSuite& suite, const LogSink& log = {});
    /// Stage-2 rows for beta in {0, 0.5, 1}.
    std::vector<AblationRow> run_beta_ablation(const RunConfig& cfg, const SceneSuite& suite, const LogSink& log = {});
    /// Both of the above, stage 1 first. Every row trains from the same seed.
    std::vector<AblationRow> run_ablation(const RunConfig& cfg, const SceneSuite& suite, const LogSink& log = {});

    /// Header `name,recall,precision,iou,miou`; stage-1 rows leave miou empty.
    std::string ablation_csv(const std::vector<AblationRow>& rows);

    /// Entry point of the command-line tool. Returns the process exit code.
    int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace gssc::cli
