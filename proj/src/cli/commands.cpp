/* SPDX-FileCopyrightText: 2026 GaussianSSC Authors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#include "gssc/commands.hpp"
#include "gssc/error.hpp"
#include "gssc/gradcheck_suite.hpp"
#include "gssc/gssc_file.hpp"
#include "gssc/parallel.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

namespace gssc::cli {

    namespace fs = std::filesystem;

    namespace {

        void write_text(const fs::path& path, const std::string& text) {
            std::ofstream f(path, std::ios::binary);
            if (!f)
                throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
            f << text;
            if (!f)
                throw IoError(fmt::format("write to '{}' failed", path.string()));
        }

        void make_out_dir(const fs::path& dir) {
            std::error_code ec;
            fs::create_directories(dir, ec);
            if (ec)
                throw IoError(fmt::format("cannot create '{}': {}", dir.string(), ec.message()));
        }

        std::string join_lines(const std::vector<std::string>& lines) {
            std::string s;
            for (const auto& l : lines)
                s += l + "\n";
            return s;
        }

        std::string loss_log(const std::vector<double>& losses) {
            std::string s;
            for (std::size_t i = 0; i < losses.size(); ++i)
                s += fmt::format("{{\"step\":{},\"loss\":{}}}\n", i + 1, losses[i]);
            return s;
        }

        std::vector<std::uint32_t> grid_extents(const RunConfig& cfg) {
            return {static_cast<std::uint32_t>(cfg.grid_dims[0]), static_cast<std::uint32_t>(cfg.grid_dims[1]),
                    static_cast<std::uint32_t>(cfg.grid_dims[2])};
        }

        void write_labels(const fs::path& path, std::vector<std::uint8_t> labels, const RunConfig& cfg) {
            io::write_gssc(path, io::from_labels(std::move(labels), grid_extents(cfg)));
        }

        fs::path checkpoint_name(int stage) { return fmt::format("stage{}.gssc", stage); }

        int cmd_gradcheck(const SuiteOptions& options, std::ostream& out) {
            const auto results = run_gradcheck_suite(options, [&](const CheckResult& r) { out << to_json(r) << "\n"; });
            int failed = 0;
            for (const auto& r : results)
                failed += !r.passed();
            return failed == 0 ? kExitOk : kExitFailure;
        }

        int cmd_train(const RunConfig& cfg, std::ostream& out) {
            make_out_dir(cfg.out_dir);
            const fs::path dir = cfg.out_dir;
            write_text(dir / "config.txt", to_text(cfg));
            const auto suite = build_suite(cfg);
            const LogSink sink = [&](const std::string& line) { out << line << "\n" << std::flush; };
            TrainResult res;
            if (cfg.stage == 1) {
                auto model = make_stage1_model(cfg);
                res = train_stage1(cfg, suite, model, sink);
                save_checkpoint(dir / checkpoint_name(1), model.store);
                for (std::size_t i = 0; i < suite.heldout.size(); ++i)
                    write_labels(dir / fmt::format("heldout_{}_occupancy.gssc", i),
                                 predict_occupancy(model, suite.heldout[i]), cfg);
            } else {
                const auto gate = load_gate_model(cfg);
                const Stage1Model* gate_ptr = gate ? &*gate : nullptr;
                auto model = make_stage2_model(cfg);
                res = train_stage2(cfg, suite, model, gate_ptr, sink);
                save_checkpoint(dir / checkpoint_name(2), model.store);
                for (std::size_t i = 0; i < suite.heldout.size(); ++i)
                    write_labels(dir / fmt::format("heldout_{}_labels.gssc", i),
                                 predict_semantics(model, suite.heldout[i], stage2_gate(suite.heldout[i], gate_ptr)),
                                 cfg);
            }
            write_text(dir / "metrics.jsonl", join_lines(res.metric_lines));
            write_text(dir / "loss.jsonl", loss_log(res.losses));
            return kExitOk;
        }

        int cmd_eval(const RunConfig& cfg, const std::string& checkpoint, std::ostream& out) {
            if (checkpoint.empty())
                throw ConfigError("eval needs --checkpoint");
            const auto suite = build_suite(cfg);
            std::vector<std::string> lines;
            if (cfg.stage == 1) {
                auto model = make_stage1_model(cfg);
                load_checkpoint(checkpoint, model.store);
                lines.push_back(metrics::json_line(0, "train", evaluate_stage1(model, suite.train)));
                lines.push_back(metrics::json_line(0, "heldout", evaluate_stage1(model, suite.heldout)));
            } else {
                auto model = make_stage2_model(cfg);
                load_checkpoint(checkpoint, model.store);
                const auto gate = load_gate_model(cfg);
                const Stage1Model* gate_ptr = gate ? &*gate : nullptr;
                lines.push_back(metrics::json_line(0, "train", evaluate_stage2(model, suite.train, gate_ptr)));
                lines.push_back(metrics::json_line(0, "heldout", evaluate_stage2(model, suite.heldout, gate_ptr)));
            }
            const std::string text = join_lines(lines);
            out << text;
            make_out_dir(cfg.out_dir);
            write_text(fs::path(cfg.out_dir) / "eval.jsonl", text);
            return kExitOk;
        }

        int cmd_ablate(const RunConfig& cfg, std::ostream& out) {
            const auto suite = build_suite(cfg);
            const auto rows = run_ablation(cfg, suite, [&](const std::string& line) { out << line << "\n" << std::flush; });
            const std::string csv = ablation_csv(rows);
            make_out_dir(cfg.out_dir);
            write_text(fs::path(cfg.out_dir) / "ablation.csv", csv);
            out << csv;
            return kExitOk;
        }

        int cmd_export(const RunConfig& cfg, const std::string& checkpoint, std::ostream& out) {
            if (checkpoint.empty())
                throw ConfigError("export needs --checkpoint");
            const auto suite = build_suite(cfg);
            make_out_dir(cfg.out_dir);
            const fs::path dir = cfg.out_dir;
            std::optional<Stage1Model> occ_model;
            std::optional<Stage2Model> sem_model;
            std::optional<Stage1Model> gate;
            if (cfg.stage == 1) {
                occ_model = make_stage1_model(cfg);
                load_checkpoint(checkpoint, occ_model->store);
            } else {
                sem_model = make_stage2_model(cfg);
                load_checkpoint(checkpoint, sem_model->store);
                gate = load_gate_model(cfg);
            }
            for (std::size_t i = 0; i < suite.heldout.size(); ++i) {
                const auto& scene = suite.heldout[i];
                std::vector<std::uint8_t> occ, labels;
                if (occ_model) {
                    occ = predict_occupancy(*occ_model, scene);
                } else {
                    occ = stage2_gate(scene, gate ? &*gate : nullptr);
                    labels = predict_semantics(*sem_model, scene, occ);
                }
                std::vector<fs::path> written{dir / fmt::format("heldout_{}_pred_occupancy.gssc", i)};
                write_labels(written.back(), occ, cfg);
                if (!labels.empty()) {
                    written.push_back(dir / fmt::format("heldout_{}_pred_labels.gssc", i));
                    write_labels(written.back(), labels, cfg);
                }
                written.push_back(dir / fmt::format("heldout_{}_gt_labels.gssc", i));
                write_labels(written.back(), scene.sample.volume.labels, cfg);
                for (const auto& p : written)
                    out << p.string() << "\n";
            }
            return kExitOk;
        }

    } // namespace

    void save_checkpoint(const fs::path& path, const ParamStore& store) {
        io::write_gssc(path, io::from_buffer(store.flatten()));
    }

    void load_checkpoint(const fs::path& path, ParamStore& store) {
        if (!fs::exists(path))
            throw IoError(fmt::format("checkpoint '{}' does not exist", path.string()));
        const auto file = io::read_gssc(path);
        if (file.dtype != io::DType::F64 || file.extents.size() != 1)
            throw IoError(fmt::format("checkpoint '{}' is not a rank-1 f64 array", path.string()));
        if (file.element_count() != store.total_elements())
            throw ConfigError(fmt::format("checkpoint '{}' holds {} values but the config describes {}", path.string(),
                                          file.element_count(), store.total_elements()));
        store.unflatten(io::to_buffer(file));
    }

    std::optional<Stage1Model> load_gate_model(const RunConfig& cfg) {
        if (cfg.gt_occupancy)
            return std::nullopt;
        if (cfg.stage1_checkpoint.empty())
            throw ConfigError("config key 'stage1_checkpoint': stage 2 needs a stage-1 checkpoint or gt_occupancy = true");
        if (!fs::exists(cfg.stage1_checkpoint))
            throw ConfigError(
                fmt::format("config key 'stage1_checkpoint': '{}' does not exist", cfg.stage1_checkpoint));
        RunConfig c1 = cfg;
        c1.stage = 1;
        auto model = make_stage1_model(c1);
        load_checkpoint(cfg.stage1_checkpoint, model.store);
        return model;
    }

    std::vector<AblationRow> run_anchor_ablation(const RunConfig& cfg, const SceneSuite& suite, const LogSink& log) {
        std::vector<AblationRow> rows;
        for (auto mode : {anchor::AnchorMode::Point, anchor::AnchorMode::Gaussian})
            for (bool neg : {true, false}) {
                RunConfig c = cfg;
                c.stage = 1;
                c.anchor_mode = mode;
                c.negative_sampling = neg;
                const std::string name = fmt::format(
                    "stage1_{}_{}", mode == anchor::AnchorMode::Point ? "point" : "gaussian", neg ? "negsample" : "allneg");
                if (log)
                    log(fmt::format("# {}", name));
                auto model = make_stage1_model(c);
                rows.push_back({name, train_stage1(c, suite, model, log).heldout, 1});
            }
        return rows;
    }

    std::vector<AblationRow> run_beta_ablation(const RunConfig& cfg, const SceneSuite& suite, const LogSink& log) {
        std::vector<AblationRow> rows;
        const auto gate = load_gate_model(cfg);
        for (double beta : {0.0, 0.5, 1.0}) {
            RunConfig c = cfg;
            c.stage = 2;
            c.beta = beta;
            const std::string name = fmt::format("stage2_beta_{}", beta);
            if (log)
                log(fmt::format("# {}", name));
            auto model = make_stage2_model(c);
            rows.push_back({name, train_stage2(c, suite, model, gate ? &*gate : nullptr, log).heldout, 2});
        }
        return rows;
    }

    std::vector<AblationRow> run_ablation(const RunConfig& cfg, const SceneSuite& suite, const LogSink& log) {
        auto rows = run_anchor_ablation(cfg, suite, log);
        for (auto& r : run_beta_ablation(cfg, suite, log))
            rows.push_back(std::move(r));
        return rows;
    }

    std::string ablation_csv(const std::vector<AblationRow>& rows) {
        std::string s = "name,recall,precision,iou,miou\n";
        for (const auto& r : rows)
            s += fmt::format("{},{},{},{},{}\n", r.name, r.report.recall, r.report.precision, r.report.iou,
                             r.report.miou ? fmt::format("{}", *r.report.miou) : std::string());
        return s;
    }

    int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
        CLI::App app{"Two-stage semantic scene completion on synthetic scenes", "gaussianssc"};
        app.require_subcommand(0, 1);
        std::string config_path, checkpoint, out_dir;
        std::optional<int> stage, threads;
        std::optional<std::uint64_t> seed;
        SuiteOptions suite_options;
        bool list_keys = false;

        auto common = [&](CLI::App* sub, bool need_config) {
            auto* opt = sub->add_option("--config", config_path, "key = value config file");
            if (need_config)
                opt->required();
            sub->add_option("--stage", stage, "stage 1 (occupancy) or 2 (semantics)")->check(CLI::Range(1, 2));
            sub->add_option("--out", out_dir, "output directory");
            sub->add_option("--seed", seed, "run seed");
            sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
        };
        auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every op and both pipelines");
        common(gradcheck, false);
        gradcheck->add_option("--corrupt", suite_options.corrupt, "corrupt the backward of one check (negative control)");
        gradcheck->add_option("--filter", suite_options.filter, "run checks whose name contains this text");
        auto* train = app.add_subcommand("train", "train one stage and write checkpoint, logs and predictions");
        common(train, true);
        auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the train and held-out scenes");
        common(eval, true);
        eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
        auto* ablate = app.add_subcommand("ablate", "anchoring, negative sampling and beta ablation table");
        common(ablate, true);
        auto* exp = app.add_subcommand("export", "write predictions and ground truth as GSSC files");
        common(exp, true);
        exp->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
        app.add_flag("--list-keys", list_keys, "print every config key with its default and exit");

        std::vector<std::string> args;
        for (int i = argc - 1; i > 0; --i)
            args.emplace_back(argv[i]);
        try {
            app.parse(args);
        } catch (const CLI::CallForHelp&) {
            out << app.help();
            return kExitOk;
        } catch (const CLI::ParseError& e) {
            err << "error: " << e.what() << "\n";
            return kExitConfig;
        }
        if (list_keys) {
            out << config_reference();
            return kExitOk;
        }
        if (app.get_subcommands().empty()) {
            err << "error: expected one of gradcheck, train, eval, ablate, export\n" << app.help();
            return kExitConfig;
        }

        try {
            RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
            if (stage)
                cfg.stage = *stage;
            if (threads)
                cfg.threads = *threads;
            if (seed)
                cfg.seed = *seed;
            if (!out_dir.empty())
                cfg.out_dir = out_dir;
            cfg.validate();
            set_num_threads(cfg.threads);

            if (*gradcheck)
                return cmd_gradcheck(suite_options, out);
            if (*train)
                return cmd_train(cfg, out);
            if (*eval)
                return cmd_eval(cfg, checkpoint, out);
            if (*ablate)
                return cmd_ablate(cfg, out);
            return cmd_export(cfg, checkpoint, out);
        } catch (const ConfigError& e) {
            err << "config error: " << e.what() << "\n";
            return kExitConfig;
        } catch (const IoError& e) {
            err << "i/o error: " << e.what() << "\n";
            return kExitIo;
        } catch (const std::exception& e) {
            err << "error: " << e.what() << "\n";
            return kExitFailure;
        }
    }

} // namespace gssc::cli
