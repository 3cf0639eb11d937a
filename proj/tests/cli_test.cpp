/* SPDX-FileCopyrightText: 2026 GaussianSSC Authors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#include "gssc/commands.hpp"
#include "gssc/error.hpp"
#include "gssc/gradcheck_suite.hpp"
#include "gssc/gssc_file.hpp"
#include "gssc/parallel.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace gssc;
using namespace gssc::cli;
namespace fs = std::filesystem;

namespace {

    const char* kTiny = R"(# small suite for fast tests
grid_x = 16
grid_y = 16
grid_z = 6
train_scenes = 2
heldout_scenes = 1
steps = 4
eval_interval = 2
lr = 3e-3
)";

    fs::path scratch(const std::string& name) {
        auto dir = fs::temp_directory_path() / ("gssc_cli_test_" + name);
        fs::remove_all(dir);
        fs::create_directories(dir);
        return dir;
    }

    void write_file(const fs::path& p, const std::string& text) {
        std::ofstream f(p);
        f << text;
    }

    std::string read_file(const fs::path& p) {
        std::ifstream f(p, std::ios::binary);
        std::stringstream ss;
        ss << f.rdbuf();
        return ss.str();
    }

    struct Run {
        int code;
        std::string out;
        std::string err;
    };

    Run invoke(std::vector<std::string> args) {
        args.insert(args.begin(), "gaussianssc");
        std::vector<const char*> argv;
        for (const auto& a : args)
            argv.push_back(a.c_str());
        std::ostringstream out, err;
        const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
        set_num_threads(1);
        return {code, out.str(), err.str()};
    }

    RunConfig tiny() { return parse_config(kTiny); }

    std::vector<nlohmann::json> json_lines(const std::string& text) {
        std::vector<nlohmann::json> out;
        std::istringstream in(text);
        for (std::string line; std::getline(in, line);)
            if (!line.empty())
                out.push_back(nlohmann::json::parse(line));
        return out;
    }

} // namespace

TEST(Config, DefaultsAndComments) {
    const auto c = parse_config("# nothing but a comment\n\n");
    EXPECT_EQ(c.grid_dims, (std::array<int, 3>{64, 64, 8}));
    EXPECT_EQ(c.train_scenes, 8);
    EXPECT_EQ(c.heldout_scenes, 2);
    EXPECT_EQ(c.seed, 0u);
    const auto t = parse_config("seed = 7  # trailing comment\nanchor_mode = point\nbeta=0.25\n");
    EXPECT_EQ(t.seed, 7u);
    EXPECT_EQ(t.anchor_mode, anchor::AnchorMode::Point);
    EXPECT_EQ(t.beta, 0.25);
}

TEST(Config, RejectedConfigsNameTheKey) {
    const std::vector<std::pair<std::string, std::string>> bad{
        {"no_such_key = 1\n", "no_such_key"},
        {"seed = 1\nseed = 2\n", "seed"},
        {"steps = ten\n", "steps"},
        {"beta = 1.5\n", "beta"},
        {"anchor_mode = bilinear\n", "anchor_mode"},
        {"lr = -1\n", "lr"},
        {"sigma_hi = 0.1\n", "sigma_hi"},
        {"class_weights = 1 2\n", "class_weights"},
        {"feature_strides = 4 6\n", "feature_strides"},
        {"threads = 0\n", "threads"},
    };
    for (const auto& [text, key] : bad) {
        try {
            parse_config(text);
            ADD_FAILURE() << "accepted: " << text;
        } catch (const ConfigError& e) {
            EXPECT_NE(std::string(e.what()).find(key), std::string::npos) << e.what();
        }
    }
    EXPECT_THROW(parse_config("just words\n"), ConfigError);
}

TEST(Config, TextRoundTrip) {
    auto c = parse_config("seed = 3\nanchor_mode = point\nclass_weights = 0.5 1 2 3\nlr = 0.00123\nbeta = 0.3\n");
    const auto text = to_text(c);
    const auto d = parse_config(text);
    EXPECT_EQ(to_text(d), text);
    EXPECT_EQ(d.stage2_loss.class_weights, c.stage2_loss.class_weights);
    EXPECT_EQ(d.optimizer.lr, c.optimizer.lr);
    EXPECT_EQ(d.beta, c.beta);
}

TEST(Config, ReferenceListsEveryKey) {
    const auto ref = config_reference();
    for (const char* key : {"seed", "grid_x", "anchor_mode", "beta", "lambda_sigma", "neg_ratio", "class_weights",
                            "lr", "steps", "stage1_checkpoint", "out_dir", "query_jitter"})
        EXPECT_NE(ref.find(std::string(key) + " ="), std::string::npos) << key;
    // Every documented line parses as a config.
    EXPECT_NO_THROW(parse_config(ref));
}

TEST(GsscFile, RoundTripsBitExactly) {
    std::mt19937_64 rng(1);
    NdBuffer b({3, 2, 4});
    for (auto& v : b.storage())
        v = std::ldexp(static_cast<double>(rng() >> 11), -40) - 1e3;
    b[0] = -0.0;
    b[1] = std::numeric_limits<double>::denorm_min();
    const auto back = io::to_buffer(io::decode(io::encode(io::from_buffer(b))));
    ASSERT_EQ(back.shape(), b.shape());
    EXPECT_EQ(std::memcmp(back.ptr(), b.ptr(), b.size() * sizeof(double)), 0);

    const auto dir = scratch("gssc");
    const auto labels = io::from_labels({0, 1, 2, 255, 3, 1}, {1, 2, 3});
    io::write_gssc(dir / "l.gssc", labels);
    const auto r = io::read_gssc(dir / "l.gssc");
    EXPECT_EQ(r.dtype, io::DType::U8);
    EXPECT_EQ(r.extents, labels.extents);
    EXPECT_EQ(r.u8, labels.u8);
}

TEST(GsscFile, HeaderLayout) {
    const auto bytes = io::encode(io::from_labels({7, 9}, {2}));
    const std::vector<std::uint8_t> expect{'G', 'S', 'S', 'C', 1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0, 7, 9};
    EXPECT_EQ(bytes, expect);
    EXPECT_EQ(io::encode(io::from_buffer(NdBuffer::vector({1.0}))).size(), 4u + 4 * 4 + 8);
}

TEST(GsscFile, MalformedInputIsIoError) {
    auto bytes = io::encode(io::from_labels({1, 2, 3}, {3}));
    auto bad = bytes;
    bad[0] = 'X';
    EXPECT_THROW(io::decode(bad), IoError);
    bad = bytes;
    bad[4] = 2;
    EXPECT_THROW(io::decode(bad), IoError);
    bad = bytes;
    bad[8] = 5;
    EXPECT_THROW(io::decode(bad), IoError);
    bad = bytes;
    bad.pop_back();
    EXPECT_THROW(io::decode(bad), IoError);
    bad = bytes;
    bad.push_back(0);
    EXPECT_THROW(io::decode(bad), IoError);
    EXPECT_THROW(io::read_gssc(fs::temp_directory_path() / "gssc_cli_test_missing.gssc"), IoError);
    EXPECT_THROW(io::from_labels({1, 2}, {3}), DimensionError);
}

TEST(Trainer, SeededRunsAreIdentical) {
    const auto cfg = tiny();
    const auto suite = build_suite(cfg);
    auto a = make_stage1_model(cfg);
    auto b = make_stage1_model(cfg);
    const auto ra = train_stage1(cfg, suite, a);
    const auto rb = train_stage1(cfg, suite, b);
    EXPECT_EQ(ra.losses, rb.losses);
    EXPECT_EQ(ra.metric_lines, rb.metric_lines);
    ASSERT_EQ(ra.metric_lines.size(), 2u);
    const auto fa = a.store.flatten(), fb = b.store.flatten();
    EXPECT_EQ(std::memcmp(fa.ptr(), fb.ptr(), fa.size() * sizeof(double)), 0);
}

TEST(Trainer, ZeroLearningRateKeepsLossConstantPerScene) {
    auto cfg = tiny();
    cfg.optimizer.lr = 0.0;
    cfg.train_scenes = 1;
    cfg.negative_sampling = false;
    const auto suite = build_suite(cfg);
    auto m = make_stage1_model(cfg);
    const auto before = m.store.flatten();
    const auto r = train_stage1(cfg, suite, m);
    for (double l : r.losses)
        EXPECT_EQ(l, r.losses.front());
    const auto after = m.store.flatten();
    EXPECT_EQ(std::memcmp(before.ptr(), after.ptr(), before.size() * sizeof(double)), 0);

    auto m2 = make_stage2_model(cfg);
    const auto r2 = train_stage2(cfg, suite, m2, nullptr);
    for (double l : r2.losses)
        EXPECT_EQ(l, r2.losses.front());
}

TEST(Trainer, LossDecreasesAndMetricsParse) {
    auto cfg = tiny();
    cfg.steps = 12;
    cfg.train_scenes = 1;
    const auto suite = build_suite(cfg);
    auto m = make_stage1_model(cfg);
    const auto r = train_stage1(cfg, suite, m);
    EXPECT_LT(r.losses.back(), r.losses.front());
    for (const auto& line : r.metric_lines) {
        const auto j = nlohmann::json::parse(line);
        EXPECT_EQ(j["split"], "heldout");
        EXPECT_TRUE(j["miou"].is_null());
    }
}

TEST(Trainer, Stage2WithoutGateNeedsGroundTruthFlag) {
    auto cfg = tiny();
    cfg.gt_occupancy = false;
    const auto suite = build_suite(cfg);
    auto m = make_stage2_model(cfg);
    EXPECT_THROW(train_stage2(cfg, suite, m, nullptr), ConfigError);
}

TEST(Trainer, AllEmptyPredictionHasZeroRecall) {
    auto cfg = tiny();
    const auto suite = build_suite(cfg);
    auto m = make_stage1_model(cfg);
    // Output bias strongly favouring the empty logit.
    auto& bias = m.store.value(m.params.head.out.bias);
    bias[0] = 1e3;
    bias[1] = -1e3;
    const auto rep = evaluate_stage1(m, suite.heldout);
    EXPECT_EQ(rep.recall, 0.0);
    EXPECT_EQ(rep.iou, 0.0);
}

TEST(Gradcheck, FullSuitePasses) {
    const auto results = run_gradcheck_suite();
    EXPECT_GE(results.size(), 60u);
    for (const auto& r : results) {
        EXPECT_TRUE(r.passed()) << to_json(r);
        const auto j = nlohmann::json::parse(to_json(r));
        EXPECT_EQ(j["check"], r.name);
    }
}

TEST(Gradcheck, CorruptedBackwardIsNamedFailure) {
    for (const char* name : {"tensor.matmul", "refinement.global_aggregate", "pipeline.stage2"}) {
        SuiteOptions opt;
        opt.corrupt = name;
        opt.filter = name;
        const auto results = run_gradcheck_suite(opt);
        ASSERT_EQ(results.size(), 1u);
        EXPECT_EQ(results[0].name, name);
        EXPECT_FALSE(results[0].passed()) << name;
    }
    SuiteOptions opt;
    opt.corrupt = "no.such.check";
    EXPECT_THROW(run_gradcheck_suite(opt), ConfigError);
}

TEST(Cli, ExitCodes) {
    const auto dir = scratch("exit");
    write_file(dir / "tiny.cfg", kTiny);
    write_file(dir / "bad.cfg", "bogus_key = 1\n");
    EXPECT_EQ(invoke({}).code, kExitConfig);
    EXPECT_EQ(invoke({"frobnicate"}).code, kExitConfig);
    EXPECT_EQ(invoke({"train"}).code, kExitConfig);
    const auto bad = invoke({"train", "--config", (dir / "bad.cfg").string()});
    EXPECT_EQ(bad.code, kExitConfig);
    EXPECT_NE(bad.err.find("bogus_key"), std::string::npos);
    EXPECT_EQ(invoke({"train", "--config", (dir / "missing.cfg").string()}).code, kExitIo);
    EXPECT_EQ(invoke({"eval", "--config", (dir / "tiny.cfg").string(), "--checkpoint", (dir / "none.gssc").string()}).code,
              kExitIo);
    EXPECT_EQ(invoke({"train", "--config", (dir / "tiny.cfg").string(), "--stage", "3"}).code, kExitConfig);
    EXPECT_EQ(invoke({"gradcheck", "--corrupt", "losses.sem_scal", "--filter", "losses.sem"}).code, kExitFailure);
    EXPECT_EQ(invoke({"gradcheck", "--filter", "losses."}).code, kExitOk);
    EXPECT_EQ(invoke({"--list-keys"}).code, kExitOk);
}

TEST(Cli, Stage2MissingCheckpointIsConfigError) {
    const auto dir = scratch("stage2");
    write_file(dir / "s2.cfg", std::string(kTiny) + "gt_occupancy = false\nstage1_checkpoint = " +
                                   (dir / "absent.gssc").string() + "\n");
    write_file(dir / "s2b.cfg", std::string(kTiny) + "gt_occupancy = false\n");
    EXPECT_EQ(invoke({"train", "--config", (dir / "s2.cfg").string(), "--stage", "2", "--out", dir.string()}).code,
              kExitConfig);
    EXPECT_EQ(invoke({"train", "--config", (dir / "s2b.cfg").string(), "--stage", "2", "--out", dir.string()}).code,
              kExitConfig);
}

TEST(Cli, TrainEvalExportRoundTrip) {
    const auto dir = scratch("flow");
    write_file(dir / "tiny.cfg", kTiny);
    const auto cfg_path = (dir / "tiny.cfg").string();
    const auto r1 = invoke({"train", "--config", cfg_path, "--out", (dir / "s1").string()});
    ASSERT_EQ(r1.code, kExitOk) << r1.err;
    for (const char* f : {"metrics.jsonl", "loss.jsonl", "stage1.gssc", "heldout_0_occupancy.gssc", "config.txt"})
        EXPECT_TRUE(fs::exists(dir / "s1" / f)) << f;
    EXPECT_EQ(read_file(dir / "s1" / "metrics.jsonl"), r1.out);
    EXPECT_EQ(json_lines(read_file(dir / "s1" / "loss.jsonl")).size(), 4u);

    // Stage 2 gated by the stage-1 checkpoint just written.
    write_file(dir / "s2.cfg", std::string(kTiny) + "gt_occupancy = false\nstage1_checkpoint = " +
                                   (dir / "s1" / "stage1.gssc").string() + "\n");
    const auto r2 = invoke({"train", "--config", (dir / "s2.cfg").string(), "--stage", "2", "--out", (dir / "s2").string()});
    ASSERT_EQ(r2.code, kExitOk) << r2.err;
    for (const auto& j : json_lines(r2.out))
        EXPECT_TRUE(j["miou"].is_number());

    const auto ev = invoke({"eval", "--config", cfg_path, "--checkpoint", (dir / "s1" / "stage1.gssc").string(), "--out",
                         (dir / "ev").string()});
    ASSERT_EQ(ev.code, kExitOk) << ev.err;
    const auto lines = json_lines(ev.out);
    ASSERT_EQ(lines.size(), 2u);
    EXPECT_EQ(lines[0]["split"], "train");
    EXPECT_EQ(lines[1]["split"], "heldout");
    // The held-out eval record matches the last training record apart from the step.
    auto last = json_lines(r1.out).back();
    last["step"] = 0;
    EXPECT_EQ(last.dump(), lines[1].dump());

    // Checkpoint from a different architecture is rejected.
    const auto wrong = invoke({"eval", "--config", cfg_path, "--stage", "2", "--checkpoint",
                            (dir / "s1" / "stage1.gssc").string(), "--out", (dir / "ev2").string()});
    EXPECT_EQ(wrong.code, kExitConfig);

    const auto ex = invoke({"export", "--config", (dir / "s2.cfg").string(), "--stage", "2", "--checkpoint",
                         (dir / "s2" / "stage2.gssc").string(), "--out", (dir / "ex").string()});
    ASSERT_EQ(ex.code, kExitOk) << ex.err;
    const auto suite = build_suite(tiny());
    const auto gt = io::read_gssc(dir / "ex" / "heldout_0_gt_labels.gssc");
    EXPECT_EQ(gt.dtype, io::DType::U8);
    EXPECT_EQ(gt.extents, (std::vector<std::uint32_t>{16, 16, 6}));
    EXPECT_EQ(gt.u8, suite.heldout[0].sample.volume.labels);
    const auto pred = io::read_gssc(dir / "ex" / "heldout_0_pred_labels.gssc");
    EXPECT_EQ(pred.dtype, io::DType::U8);
    const auto occ = io::read_gssc(dir / "ex" / "heldout_0_pred_occupancy.gssc");
    for (std::size_t v = 0; v < occ.u8.size(); ++v) {
        if (!occ.u8[v]) {
            ASSERT_EQ(pred.u8[v], 0) << v;
        }
    }
    const auto bytes = read_file(dir / "ex" / "heldout_0_pred_labels.gssc");
    EXPECT_EQ(io::encode(pred), std::vector<std::uint8_t>(bytes.begin(), bytes.end()));
}

TEST(Cli, MetricLogsIdenticalAcrossRunsAndThreads) {
    const auto dir = scratch("det");
    write_file(dir / "tiny.cfg", kTiny);
    const auto cfg_path = (dir / "tiny.cfg").string();
    std::vector<std::string> logs, evals;
    for (const char* threads : {"1", "1", "4"}) {
        const auto out = (dir / (std::string("t") + threads + std::to_string(logs.size()))).string();
        const auto r = invoke({"train", "--config", cfg_path, "--threads", threads, "--out", out});
        ASSERT_EQ(r.code, kExitOk) << r.err;
        logs.push_back(read_file(fs::path(out) / "metrics.jsonl") + read_file(fs::path(out) / "loss.jsonl"));
        const auto e = invoke({"eval", "--config", cfg_path, "--threads", threads, "--checkpoint",
                            (fs::path(out) / "stage1.gssc").string(), "--out", out});
        ASSERT_EQ(e.code, kExitOk) << e.err;
        evals.push_back(e.out);
    }
    EXPECT_EQ(logs[0], logs[1]);
    EXPECT_EQ(logs[0], logs[2]);
    EXPECT_EQ(evals[0], evals[1]);
    EXPECT_EQ(evals[0], evals[2]);
}

TEST(Ablation, CsvSchemaAndReproducibility) {
    auto cfg = tiny();
    cfg.steps = 2;
    const auto suite = build_suite(cfg);
    const auto a = ablation_csv(run_ablation(cfg, suite));
    const auto b = ablation_csv(run_ablation(cfg, suite));
    EXPECT_EQ(a, b);
    std::istringstream in(a);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "name,recall,precision,iou,miou");
    std::vector<std::string> names;
    while (std::getline(in, line)) {
        names.push_back(line.substr(0, line.find(',')));
        const bool stage1 = line.rfind("stage1_", 0) == 0;
        EXPECT_EQ(line.back() == ',', stage1) << line;
        EXPECT_EQ(std::count(line.begin(), line.end(), ','), 4) << line;
    }
    EXPECT_EQ(names, (std::vector<std::string>{"stage1_point_negsample", "stage1_point_allneg",
                                               "stage1_gaussian_negsample", "stage1_gaussian_allneg",
                                               "stage2_beta_0", "stage2_beta_0.5", "stage2_beta_1"}));
}
