/* SPDX-FileCopyrightText: 2026 GaussianSSC Authors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#include "gssc/config.hpp"
#include "gssc/error.hpp"

#include <fmt/format.h>

#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <vector>

namespace gssc::cli {

    namespace {

        std::string_view trim(std::string_view s) {
            const auto b = s.find_first_not_of(" \t\r");
            if (b == std::string_view::npos)
                return {};
            const auto e = s.find_last_not_of(" \t\r");
            return s.substr(b, e - b + 1);
        }

        std::vector<std::string_view> split_words(std::string_view s) {
            std::vector<std::string_view> out;
            std::size_t i = 0;
            while (i < s.size()) {
                while (i < s.size() && (s[i] == ' ' || s[i] == '\t'))
                    ++i;
                std::size_t j = i;
                while (j < s.size() && s[j] != ' ' && s[j] != '\t')
                    ++j;
                if (j > i)
                    out.push_back(s.substr(i, j - i));
                i = j;
            }
            return out;
        }

        [[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expect) {
            throw ConfigError(fmt::format("config key '{}': cannot read '{}' as {}", key, value, expect));
        }

        template <class T>
        T parse_number(std::string_view key, std::string_view value) {
            T out{};
            const auto* end = value.data() + value.size();
            const auto [ptr, ec] = std::from_chars(value.data(), end, out);
            if (ec != std::errc{} || ptr != end)
                bad_value(key, value, std::is_integral_v<T> ? "an integer" : "a number");
            return out;
        }

        bool parse_bool(std::string_view key, std::string_view value) {
            if (value == "true" || value == "1")
                return true;
            if (value == "false" || value == "0")
                return false;
            bad_value(key, value, "true/false");
        }

        std::vector<double> parse_list(std::string_view key, std::string_view value) {
            std::vector<double> out;
            for (auto w : split_words(value))
                out.push_back(parse_number<double>(key, w));
            return out;
        }

        std::string fmt_double(double v) { return fmt::format("{}", v); }

        std::string fmt_list(const std::vector<double>& v) {
            std::string out;
            for (std::size_t i = 0; i < v.size(); ++i)
                out += (i ? " " : "") + fmt_double(v[i]);
            return out;
        }

        struct Key {
            const char* name;
            const char* doc;
            std::function<void(RunConfig&, std::string_view)> set;
            std::function<std::string(const RunConfig&)> get;
        };

        template <class T>
        Key int_key(const char* name, const char* doc, T RunConfig::*field) {
            return {name, doc,
                    [name, field](RunConfig& c, std::string_view v) { c.*field = parse_number<T>(name, v); },
                    [field](const RunConfig& c) { return fmt::format("{}", c.*field); }};
        }

        template <class Get>
        Key double_key(const char* name, const char* doc, Get ref) {
            return {name, doc, [name, ref](RunConfig& c, std::string_view v) { ref(c) = parse_number<double>(name, v); },
                    [ref](const RunConfig& c) { return fmt_double(ref(c)); }};
        }

        template <class Get>
        Key size_key(const char* name, const char* doc, Get ref) {
            return {name, doc,
                    [name, ref](RunConfig& c, std::string_view v) { ref(c) = parse_number<std::size_t>(name, v); },
                    [ref](const RunConfig& c) { return fmt::format("{}", ref(c)); }};
        }

        template <class Get>
        Key int_ref_key(const char* name, const char* doc, Get ref) {
            return {name, doc, [name, ref](RunConfig& c, std::string_view v) { ref(c) = parse_number<int>(name, v); },
                    [ref](const RunConfig& c) { return fmt::format("{}", ref(c)); }};
        }

        template <class Get>
        Key bool_key(const char* name, const char* doc, Get ref) {
            return {name, doc, [name, ref](RunConfig& c, std::string_view v) { ref(c) = parse_bool(name, v); },
                    [ref](const RunConfig& c) { return ref(c) ? "true" : "false"; }};
        }

        const std::vector<Key>& keys() {
            static const std::vector<Key> table = [] {
                std::vector<Key> k;
                k.push_back(int_key("seed", "suite seed; train scenes use seed*1000+i, held-out seed*1000+100+i",
                                    &RunConfig::seed));
                k.push_back(int_key("threads", "worker threads for data-parallel kernels", &RunConfig::threads));
                k.push_back(int_key("stage", "pipeline stage to train or evaluate (1 or 2)", &RunConfig::stage));
                k.push_back(int_ref_key("grid_x", "voxels along x", [](auto& c) -> auto& { return c.grid_dims[0]; }));
                k.push_back(int_ref_key("grid_y", "voxels along y", [](auto& c) -> auto& { return c.grid_dims[1]; }));
                k.push_back(int_ref_key("grid_z", "voxels along z", [](auto& c) -> auto& { return c.grid_dims[2]; }));
                k.push_back(double_key("voxel_size", "voxel edge length in metres",
                                       [](auto& c) -> auto& { return c.voxel_size; }));
                k.push_back(double_key("camera_fx", "focal length x (px)", [](auto& c) -> auto& { return c.intr.fx; }));
                k.push_back(double_key("camera_fy", "focal length y (px)", [](auto& c) -> auto& { return c.intr.fy; }));
                k.push_back(double_key("camera_cx", "principal point x (px)", [](auto& c) -> auto& { return c.intr.cx; }));
                k.push_back(double_key("camera_cy", "principal point y (px)", [](auto& c) -> auto& { return c.intr.cy; }));
                k.push_back(int_ref_key("image_width", "image width (px)", [](auto& c) -> auto& { return c.intr.width; }));
                k.push_back(int_ref_key("image_height", "image height (px)", [](auto& c) -> auto& { return c.intr.height; }));
                k.push_back(int_key("num_classes", "semantic classes including empty", &RunConfig::num_classes));
                k.push_back(int_key("train_scenes", "scenes in the training suite", &RunConfig::train_scenes));
                k.push_back(int_key("heldout_scenes", "scenes in the held-out suite", &RunConfig::heldout_scenes));
                k.push_back(size_key("feature_channels", "image feature channels (class code plus inverse depth)",
                                     [](auto& c) -> auto& { return c.render.channels; }));
                k.push_back({"feature_strides", "pyramid strides in pixels, finest first",
                             [](RunConfig& c, std::string_view v) { c.render.strides = parse_list("feature_strides", v); },
                             [](const RunConfig& c) { return fmt_list(c.render.strides); }});
                k.push_back(double_key("feature_noise", "std of Gaussian noise on image features",
                                       [](auto& c) -> auto& { return c.render.noise; }));
                k.push_back(double_key("query_dropout", "fraction of visible-surface queries removed",
                                       [](auto& c) -> auto& { return c.queries.dropout; }));
                k.push_back(double_key("query_jitter", "fraction of queries moved by one voxel",
                                       [](auto& c) -> auto& { return c.queries.jitter; }));
                k.push_back(size_key("width", "triplane channel width d", [](auto& c) -> auto& { return c.width; }));
                k.push_back(size_key("token_width", "stage-2 voxel token width",
                                     [](auto& c) -> auto& { return c.token_width; }));
                k.push_back(size_key("embed_width", "axis embedding width",
                                     [](auto& c) -> auto& { return c.embed_width; }));
                k.push_back(size_key("head_width", "stage-1 occupancy head width",
                                     [](auto& c) -> auto& { return c.head_width; }));
                k.push_back(int_key("points", "sampling points per deformable attention query", &RunConfig::points));
                k.push_back(int_key("window_radius", "anchor window radius in texels", &RunConfig::window_radius));
                k.push_back(double_key("sigma_lo", "lower clamp of decoded scales",
                                       [](auto& c) -> auto& { return c.sigma_lo; }));
                k.push_back(double_key("sigma_hi", "upper clamp of decoded scales",
                                       [](auto& c) -> auto& { return c.sigma_hi; }));
                k.push_back({"anchor_mode", "gaussian or point (bilinear sample at the projected centre)",
                             [](RunConfig& c, std::string_view v) {
                                 if (v == "gaussian")
                                     c.anchor_mode = anchor::AnchorMode::Gaussian;
                                 else if (v == "point")
                                     c.anchor_mode = anchor::AnchorMode::Point;
                                 else
                                     bad_value("anchor_mode", v, "gaussian/point");
                             },
                             [](const RunConfig& c) {
                                 return std::string(c.anchor_mode == anchor::AnchorMode::Gaussian ? "gaussian" : "point");
                             }});
                k.push_back(double_key("beta", "local/global blend per plane, in [0, 1]",
                                       [](auto& c) -> auto& { return c.beta; }));
                k.push_back(int_key("r_max", "largest plane Gaussian window radius", &RunConfig::r_max));
                k.push_back(double_key("w0", "stage-1 weight of empty voxels",
                                       [](auto& c) -> auto& { return c.stage1_loss.w0; }));
                k.push_back(double_key("w1", "stage-1 weight of occupied voxels",
                                       [](auto& c) -> auto& { return c.stage1_loss.w1; }));
                k.push_back(double_key("lambda_sigma", "anchor scale prior weight",
                                       [](auto& c) -> auto& { return c.stage1_loss.lambda_sigma; }));
                k.push_back(double_key("lambda_delta", "anchor offset prior weight",
                                       [](auto& c) -> auto& { return c.stage1_loss.lambda_delta; }));
                k.push_back(double_key("sigma0", "reference anchor scale in texels",
                                       [](auto& c) -> auto& { return c.stage1_loss.sigma0; }));
                k.push_back(double_key("neg_ratio", "sampled negatives per positive",
                                       [](auto& c) -> auto& { return c.stage1_loss.neg_ratio; }));
                k.push_back(bool_key("negative_sampling", "subsample negatives in the stage-1 loss",
                                     [](auto& c) -> auto& { return c.negative_sampling; }));
                k.push_back({"class_weights", "stage-2 per-class CE weights; empty means all 1",
                             [](RunConfig& c, std::string_view v) {
                                 c.stage2_loss.class_weights = parse_list("class_weights", v);
                             },
                             [](const RunConfig& c) { return fmt_list(c.stage2_loss.class_weights); }});
                k.push_back(double_key("lambda_ce", "stage-2 cross-entropy weight",
                                       [](auto& c) -> auto& { return c.stage2_loss.lambda_ce; }));
                k.push_back(double_key("lambda_sem", "stage-2 sem_scal weight",
                                       [](auto& c) -> auto& { return c.stage2_loss.lambda_sem; }));
                k.push_back(double_key("lr", "Adam learning rate", [](auto& c) -> auto& { return c.optimizer.lr; }));
                k.push_back(double_key("adam_beta1", "Adam first-moment decay",
                                       [](auto& c) -> auto& { return c.optimizer.beta1; }));
                k.push_back(double_key("adam_beta2", "Adam second-moment decay",
                                       [](auto& c) -> auto& { return c.optimizer.beta2; }));
                k.push_back(double_key("adam_eps", "Adam epsilon", [](auto& c) -> auto& { return c.optimizer.eps; }));
                k.push_back(int_key("steps", "optimizer steps", &RunConfig::steps));
                k.push_back(int_key("eval_interval", "steps between held-out evaluations", &RunConfig::eval_interval));
                k.push_back(bool_key("gt_occupancy", "stage 2 gates with ground-truth occupancy",
                                     [](auto& c) -> auto& { return c.gt_occupancy; }));
                k.push_back({"stage1_checkpoint", "stage-1 parameters used for gating when gt_occupancy = false",
                             [](RunConfig& c, std::string_view v) { c.stage1_checkpoint = std::string(v); },
                             [](const RunConfig& c) { return c.stage1_checkpoint; }});
                k.push_back({"out_dir", "directory for logs, checkpoints and exports",
                             [](RunConfig& c, std::string_view v) { c.out_dir = std::string(v); },
                             [](const RunConfig& c) { return c.out_dir; }});
                return k;
            }();
            return table;
        }

        const Key* find_key(std::string_view name) {
            for (const auto& k : keys())
                if (name == k.name)
                    return &k;
            return nullptr;
        }

        void require(bool ok, const char* key, const std::string& why) {
            if (!ok)
                throw ConfigError(fmt::format("config key '{}': {}", key, why));
        }

    } // namespace

    void RunConfig::validate() const {
        require(threads >= 1, "threads", "must be at least 1");
        require(stage == 1 || stage == 2, "stage", "must be 1 or 2");
        require(grid_dims[0] >= 1, "grid_x", "must be positive");
        require(grid_dims[1] >= 1, "grid_y", "must be positive");
        require(grid_dims[2] >= 1, "grid_z", "must be positive");
        require(voxel_size > 0.0, "voxel_size", "must be positive");
        require(intr.fx > 0.0, "camera_fx", "must be positive");
        require(intr.fy > 0.0, "camera_fy", "must be positive");
        require(intr.width >= 1, "image_width", "must be positive");
        require(intr.height >= 1, "image_height", "must be positive");
        require(num_classes >= 4 && num_classes <= 254, "num_classes", "must lie in 4..254");
        require(train_scenes >= 1, "train_scenes", "must be at least 1");
        require(heldout_scenes >= 1, "heldout_scenes", "must be at least 1");
        require(render.channels >= static_cast<std::size_t>(num_classes) + 1, "feature_channels",
                "needs one channel per class plus inverse depth");
        require(!render.strides.empty(), "feature_strides", "needs at least one level");
        for (std::size_t l = 0; l < render.strides.size(); ++l)
            require(render.strides[l] > 0.0 && (l == 0 || render.strides[l] == 2.0 * render.strides[l - 1]),
                    "feature_strides", "must be positive and double from level to level");
        require(render.noise >= 0.0, "feature_noise", "must be non-negative");
        require(queries.dropout >= 0.0 && queries.dropout < 1.0, "query_dropout", "must lie in [0, 1)");
        require(queries.jitter >= 0.0 && queries.jitter <= 1.0, "query_jitter", "must lie in [0, 1]");
        require(width >= 1, "width", "must be positive");
        require(token_width >= 1, "token_width", "must be positive");
        require(embed_width >= 1, "embed_width", "must be positive");
        require(head_width >= 1, "head_width", "must be positive");
        require(points >= 1, "points", "must be positive");
        require(window_radius >= 0, "window_radius", "must be non-negative");
        require(sigma_lo > 0.0, "sigma_lo", "must be positive");
        require(sigma_hi > sigma_lo, "sigma_hi", "must exceed sigma_lo");
        require(beta >= 0.0 && beta <= 1.0, "beta", "must lie in [0, 1]");
        require(r_max >= 0, "r_max", "must be non-negative");
        require(stage1_loss.w0 > 0.0, "w0", "must be positive");
        require(stage1_loss.w1 > 0.0, "w1", "must be positive");
        require(stage1_loss.lambda_sigma >= 0.0, "lambda_sigma", "must be non-negative");
        require(stage1_loss.lambda_delta >= 0.0, "lambda_delta", "must be non-negative");
        require(stage1_loss.sigma0 > 0.0, "sigma0", "must be positive");
        require(stage1_loss.neg_ratio > 0.0, "neg_ratio", "must be positive");
        require(stage2_loss.class_weights.empty() ||
                    stage2_loss.class_weights.size() == static_cast<std::size_t>(num_classes),
                "class_weights", "needs one weight per class");
        for (double w : stage2_loss.class_weights)
            require(w > 0.0, "class_weights", "weights must be positive");
        require(stage2_loss.lambda_ce >= 0.0, "lambda_ce", "must be non-negative");
        require(stage2_loss.lambda_sem >= 0.0, "lambda_sem", "must be non-negative");
        require(optimizer.lr >= 0.0, "lr", "must be non-negative");
        require(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0, "adam_beta1", "must lie in [0, 1)");
        require(optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0, "adam_beta2", "must lie in [0, 1)");
        require(optimizer.eps > 0.0, "adam_eps", "must be positive");
        require(steps >= 0, "steps", "must be non-negative");
        require(eval_interval >= 1, "eval_interval", "must be positive");
        require(!out_dir.empty(), "out_dir", "must not be empty");
    }

    RunConfig parse_config(std::string_view text) {
        RunConfig cfg;
        std::set<std::string, std::less<>> seen;
        std::size_t line_no = 0;
        while (!text.empty()) {
            const auto nl = text.find('\n');
            std::string_view line = text.substr(0, nl);
            text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
            ++line_no;
            if (const auto hash = line.find('#'); hash != std::string_view::npos)
                line = line.substr(0, hash);
            line = trim(line);
            if (line.empty())
                continue;
            const auto eq = line.find('=');
            if (eq == std::string_view::npos)
                throw ConfigError(fmt::format("config line {}: expected 'key = value', got '{}'", line_no, line));
            const auto key = trim(line.substr(0, eq));
            const auto value = trim(line.substr(eq + 1));
            const Key* k = find_key(key);
            if (!k)
                throw ConfigError(fmt::format("unknown config key '{}' (line {})", key, line_no));
            if (!seen.insert(std::string(key)).second)
                throw ConfigError(fmt::format("config key '{}' appears twice (line {})", key, line_no));
            k->set(cfg, value);
        }
        cfg.validate();
        return cfg;
    }

    RunConfig load_config(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in)
            throw IoError(fmt::format("cannot open config {}", path.string()));
        std::stringstream ss;
        ss << in.rdbuf();
        return parse_config(ss.str());
    }

    std::string to_text(const RunConfig& cfg) {
        std::string out;
        for (const auto& k : keys())
            out += fmt::format("{} = {}\n", k.name, k.get(cfg));
        return out;
    }

    std::string config_reference() {
        const RunConfig defaults;
        std::string out;
        for (const auto& k : keys())
            out += fmt::format("{} = {}  # {}\n", k.name, k.get(defaults), k.doc);
        return out;
    }

    geom::VoxelGridSpec grid_spec(const RunConfig& cfg) {
        return geom::VoxelGridSpec{{0.0, 0.0, 0.0}, cfg.grid_dims, cfg.voxel_size};
    }

    synth::SampleConfig sample_config(const RunConfig& cfg) {
        synth::SampleConfig s;
        s.grid = grid_spec(cfg);
        s.intr = cfg.intr;
        s.num_classes = cfg.num_classes;
        s.render = cfg.render;
        s.queries = cfg.queries;
        return s;
    }

    anchor::Stage1Config stage1_config(const RunConfig& cfg) {
        anchor::Stage1Config s;
        s.grid = grid_spec(cfg);
        s.width = cfg.width;
        s.feature_width = cfg.render.channels;
        s.embed_width = cfg.embed_width;
        s.head_width = cfg.head_width;
        s.image_channels = cfg.render.channels;
        s.levels = cfg.render.strides.size();
        s.window_radius = cfg.window_radius;
        s.sigma_lo = cfg.sigma_lo;
        s.sigma_hi = cfg.sigma_hi;
        s.mode = cfg.anchor_mode;
        return s;
    }

    refine::Stage2Config stage2_config(const RunConfig& cfg) {
        refine::Stage2Config s;
        s.grid = grid_spec(cfg);
        s.token_width = cfg.token_width;
        s.width = cfg.width;
        s.embed_width = cfg.embed_width;
        s.image_channels = cfg.render.channels;
        s.levels = cfg.render.strides.size();
        s.num_classes = static_cast<std::size_t>(cfg.num_classes);
        s.points = cfg.points;
        s.beta = cfg.beta;
        s.r_max = cfg.r_max;
        s.sigma_lo = cfg.sigma_lo;
        s.sigma_hi = cfg.sigma_hi;
        return s;
    }

} // namespace gssc::cli
