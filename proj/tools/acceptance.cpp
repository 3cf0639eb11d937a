/* SPDX-FileCopyrightText: 2026 GaussianSSC Authors
 *
 * SPDX-License-Identifier: Apache-2.0 */

// Acceptance run: one PASS/FAIL line per criterion. Exits 0 only when all pass.

#include "gssc/anchoring.hpp"
#include "gssc/commands.hpp"
#include "gssc/geometry.hpp"
#include "gssc/gradcheck_suite.hpp"
#include "gssc/losses.hpp"
#include "gssc/metrics.hpp"
#include "gssc/parallel.hpp"
#include "gssc/refinement.hpp"

#include <fmt/core.h>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>

using namespace gssc;
namespace fs = std::filesystem;

namespace {

    using Mask = std::vector<std::uint8_t>;
    using Clock = std::chrono::steady_clock;

    struct Outcome {
        bool pass = false;
        std::string detail;
    };

    double seconds_since(Clock::time_point t0) {
        return std::chrono::duration<double>(Clock::now() - t0).count();
    }

    NdBuffer uniform(Shape shape, std::mt19937_64& rng, double lo, double hi) {
        NdBuffer b(std::move(shape));
        std::uniform_real_distribution<double> dist(lo, hi);
        for (auto& v : b.storage())
            v = dist(rng);
        return b;
    }

    bool bit_equal(const NdBuffer& a, const NdBuffer& b) {
        return a.shape() == b.shape() && std::equal(a.data().begin(), a.data().end(), b.data().begin());
    }

    std::string read_file(const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream s;
        s << in.rdbuf();
        return s.str();
    }

    // ---------------------------------------------------------------- 1

    Outcome gradient_suite() {
        const auto t0 = Clock::now();
        double op_worst = 0.0, pipe_worst = 0.0;
        int failed = 0, total = 0;
        std::string first_fail;
        cli::run_gradcheck_suite({}, [&](const cli::CheckResult& r) {
            ++total;
            const bool pipe = r.name.rfind("pipeline.", 0) == 0;
            (pipe ? pipe_worst : op_worst) = std::max(pipe ? pipe_worst : op_worst, r.max_rel_error);
            if (!r.passed() && failed++ == 0)
                first_fail = r.name;
        });
        const double secs = seconds_since(t0);
        return {failed == 0 && op_worst <= 1e-5 && pipe_worst <= 1e-4 && secs < 60.0,
                fmt::format("{} checks, {} failed{}; worst op {:.2e} (<= 1e-5), worst pipeline {:.2e} (<= 1e-4); {:.1f} s "
                            "(< 60 s)",
                            total, failed, first_fail.empty() ? "" : " (first " + first_fail + ")", op_worst,
                            pipe_worst, secs)};
    }

    // ---------------------------------------------------------------- 2

    struct Hull {
        double lo = 1e300, hi = -1e300;
        void add(double v) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        [[nodiscard]] double excess(double v) const { return std::max({0.0, lo - v, v - hi}); }
    };

    // Radius of the splat footprint written out directly.
    int splat_radius(double ta, double tb) {
        return std::min(static_cast<int>(std::ceil(3.0 * std::max(ta, tb))), refine::kMaxRadius);
    }

    Outcome normalization() {
        std::mt19937_64 rng(2024);
        const std::size_t draws = 10000;
        const int r = anchor::kWindowRadius, side = 2 * r + 1;

        Tape t;
        const auto mu = uniform({draws, 2}, rng, -5.0, 40.0);
        const auto sigma = uniform({draws, 2}, rng, anchor::kSigmaLo, anchor::kSigmaHi);
        const auto alpha = uniform({draws}, rng, 1e-3, 1.0);
        const auto w = anchor::anchor_weights(t.constant(mu), t.constant(sigma), t.constant(alpha)).value();
        double sum_err = 0.0;
        for (std::size_t i = 0; i < draws; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < static_cast<std::size_t>(side * side); ++j)
                s += w.at(i, j);
            sum_err = std::max(sum_err, std::abs(s - 1.0));
        }

        double anchor_excess = 0.0, local_excess = 0.0, global_excess = 0.0;
        for (int trial = 0; trial < 1000; ++trial) {
            const std::size_t h = 2 + rng() % 8, wd = 2 + rng() % 8, c = 1 + rng() % 3, n = 8;
            const auto fmap = uniform({h, wd, c}, rng, -2, 2);
            const auto m = uniform({n, 2}, rng, -2.0, static_cast<double>(std::max(h, wd)) + 1.0);
            Tape tp;
            const auto g = anchor::anchor_aggregate(tp.constant(fmap), tp.constant(m),
                                                    tp.constant(uniform({n, 2}, rng, anchor::kSigmaLo, anchor::kSigmaHi)),
                                                    tp.constant(uniform({n}, rng, 0.01, 1.0)))
                               .value();
            for (std::size_t i = 0; i < n; ++i) {
                const int cu = static_cast<int>(std::floor(m[2 * i] + 0.5));
                const int cv = static_cast<int>(std::floor(m[2 * i + 1] + 0.5));
                for (std::size_t k = 0; k < c; ++k) {
                    Hull hull;
                    for (int dv = -r; dv <= r; ++dv)
                        for (int du = -r; du <= r; ++du) {
                            const auto u = static_cast<std::size_t>(std::clamp(cu + du, 0, static_cast<int>(wd) - 1));
                            const auto v = static_cast<std::size_t>(std::clamp(cv + dv, 0, static_cast<int>(h) - 1));
                            hull.add(fmap[(v * wd + u) * c + k]);
                        }
                    anchor_excess = std::max(anchor_excess, hull.excess(g.at(i, k)));
                }
            }
        }

        for (int trial = 0; trial < 1000; ++trial) {
            const int rows = 1 + static_cast<int>(rng() % 7), cols = 1 + static_cast<int>(rng() % 7);
            const std::size_t d = 1 + rng() % 3, cells = static_cast<std::size_t>(rows * cols);
            const auto plane = uniform({std::size_t(rows), std::size_t(cols), d}, rng, -2, 2);
            const auto theta = uniform({cells, 2}, rng, 0.3, 3.0);
            Tape tp;
            const auto out = refine::local_gather(tp.constant(plane), tp.constant(theta)).value();
            for (int a = 0; a < rows; ++a)
                for (int b = 0; b < cols; ++b) {
                    const std::size_t i = static_cast<std::size_t>(a * cols + b);
                    const int rad = refine::window_radius(theta[2 * i], theta[2 * i + 1]);
                    for (std::size_t k = 0; k < d; ++k) {
                        Hull hull;
                        for (int u = std::max(0, a - rad); u <= std::min(rows - 1, a + rad); ++u)
                            for (int v = std::max(0, b - rad); v <= std::min(cols - 1, b + rad); ++v)
                                hull.add(plane[static_cast<std::size_t>(u * cols + v) * d + k]);
                        local_excess = std::max(local_excess, hull.excess(out[i * d + k]));
                    }
                }
        }

        for (int trial = 0; trial < 1000; ++trial) {
            const int rows = 1 + static_cast<int>(rng() % 7), cols = 1 + static_cast<int>(rng() % 7);
            const std::size_t d = 1 + rng() % 3, cells = static_cast<std::size_t>(rows * cols);
            const auto plane = uniform({std::size_t(rows), std::size_t(cols), d}, rng, -2, 2);
            const auto theta = uniform({cells, 2}, rng, 0.3, 3.0);
            const auto al = uniform({cells}, rng, 0.01, 1.0);
            Tape tp;
            const auto out = refine::global_aggregate(tp.constant(plane), tp.constant(theta), tp.constant(al)).value();
            for (std::size_t i = 0; i < cells; ++i) {
                const int a = static_cast<int>(i) / cols, b = static_cast<int>(i) % cols;
                // Support: the sources whose footprint covers cell i; cell i itself when none does.
                std::vector<std::size_t> sources;
                for (std::size_t j = 0; j < cells; ++j) {
                    const int rad = splat_radius(theta[2 * j], theta[2 * j + 1]);
                    if (std::abs(static_cast<int>(j) / cols - a) <= rad && std::abs(static_cast<int>(j) % cols - b) <= rad)
                        sources.push_back(j);
                }
                if (sources.empty())
                    sources.push_back(i);
                for (std::size_t k = 0; k < d; ++k) {
                    Hull hull;
                    for (auto j : sources)
                        hull.add(plane[j * d + k]);
                    global_excess = std::max(global_excess, hull.excess(out[i * d + k]));
                }
            }
        }

        const double tol = 1e-12;
        return {sum_err <= 1e-12 && anchor_excess <= tol && local_excess <= tol && global_excess <= tol,
                fmt::format("weight sums |s-1| max {:.1e} over {} draws (<= 1e-12); hull excess over 1000 instances: "
                            "anchor_aggregate {:.1e}, local_gather {:.1e}, global_aggregate {:.1e} (<= 1e-12)",
                            sum_err, draws, anchor_excess, local_excess, global_excess)};
    }

    // ---------------------------------------------------------------- 3

    NdBuffer dense_conv(const NdBuffer& plane, double ta, double tb, int radius) {
        const int rows = static_cast<int>(plane.dim(0)), cols = static_cast<int>(plane.dim(1));
        const std::size_t d = plane.dim(2);
        NdBuffer out(plane.shape());
        for (int a = 0; a < rows; ++a)
            for (int b = 0; b < cols; ++b) {
                std::vector<double> num(d, 0.0);
                double den = 0.0;
                for (int u = std::max(0, a - radius); u <= std::min(rows - 1, a + radius); ++u)
                    for (int v = std::max(0, b - radius); v <= std::min(cols - 1, b + radius); ++v) {
                        const double du = u - a, dv = v - b;
                        const double w = std::exp(-0.5 * (du * du / (ta * ta) + dv * dv / (tb * tb)));
                        den += w;
                        for (std::size_t c = 0; c < d; ++c)
                            num[c] += w * plane[static_cast<std::size_t>(u * cols + v) * d + c];
                    }
                for (std::size_t c = 0; c < d; ++c)
                    out[static_cast<std::size_t>(a * cols + b) * d + c] = num[c] / den;
            }
        return out;
    }

    NdBuffer splat_brute_force(const NdBuffer& plane, const NdBuffer& theta, const NdBuffer& alpha) {
        const int rows = static_cast<int>(plane.dim(0)), cols = static_cast<int>(plane.dim(1));
        const std::size_t d = plane.dim(2);
        NdBuffer out(plane.shape());
        for (int a = 0; a < rows; ++a)
            for (int b = 0; b < cols; ++b) {
                std::vector<double> num(d, 0.0);
                double den = 0.0;
                for (int u = 0; u < rows; ++u)
                    for (int v = 0; v < cols; ++v) {
                        const std::size_t j = static_cast<std::size_t>(u * cols + v);
                        const double ta = theta[2 * j], tb = theta[2 * j + 1];
                        const int rad = splat_radius(ta, tb);
                        if (std::abs(u - a) > rad || std::abs(v - b) > rad)
                            continue;
                        const double du = a - u, dv = b - v;
                        const double g = alpha[j] * std::exp(-0.5 * (du * du / (ta * ta) + dv * dv / (tb * tb))) /
                                         (2.0 * std::numbers::pi * ta * tb);
                        den += g;
                        for (std::size_t c = 0; c < d; ++c)
                            num[c] += g * plane[j * d + c];
                    }
                for (std::size_t c = 0; c < d; ++c)
                    out[static_cast<std::size_t>(a * cols + b) * d + c] = num[c] / den;
            }
        return out;
    }

    double max_abs_diff(const NdBuffer& a, const NdBuffer& b) {
        double m = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i)
            m = std::max(m, std::abs(a[i] - b[i]));
        return m;
    }

    Outcome oracles() {
        std::mt19937_64 rng(77);
        double local = 0.0, global = 0.0;
        for (int trial = 0; trial < 5; ++trial) {
            const auto plane = uniform({16, 16, 4}, rng, -1, 1);
            const double ta = std::uniform_real_distribution<double>(0.3, 2.9)(rng);
            const double tb = std::uniform_real_distribution<double>(0.3, 2.9)(rng);
            NdBuffer theta({256, 2});
            for (std::size_t i = 0; i < 256; ++i) {
                theta[2 * i] = ta;
                theta[2 * i + 1] = tb;
            }
            Tape t;
            const auto out = refine::local_gather(t.constant(plane), t.constant(theta)).value();
            local = std::max(local, max_abs_diff(out, dense_conv(plane, ta, tb, refine::window_radius(ta, tb))));
        }
        for (int trial = 0; trial < 5; ++trial) {
            const auto plane = uniform({12, 12, 4}, rng, -1, 1);
            const auto theta = uniform({144, 2}, rng, 0.3, 3.0);
            const auto alpha = uniform({144}, rng, 0.01, 1.0);
            Tape t;
            const auto out =
                refine::global_aggregate(t.constant(plane), t.constant(theta), t.constant(alpha)).value();
            global = std::max(global, max_abs_diff(out, splat_brute_force(plane, theta, alpha)));
        }
        return {local < 1e-10 && global < 1e-10,
                fmt::format("local_gather vs dense convolution (16x16) {:.1e}; global_aggregate vs brute force (12x12) "
                            "{:.1e} (< 1e-10)",
                            local, global)};
    }

    // ---------------------------------------------------------------- 4

    NdBuffer hard_logits(const Mask& cls, std::size_t c) {
        NdBuffer z({cls.size(), c}, -1000.0);
        for (std::size_t i = 0; i < cls.size(); ++i)
            z[i * c + cls[i]] = 1000.0;
        return z;
    }

    Outcome fixed_points() {
        std::mt19937_64 rng(5);
        std::vector<std::string> broken;
        auto expect_zero = [&](const std::string& name, const std::function<Var(Tape&)>& f) {
            Tape t;
            if (f(t).value()[0] != 0.0)
                broken.push_back(name);
        };
        Mask occ(64), labels(64), all(64, 1);
        for (std::size_t i = 0; i < 64; ++i) {
            labels[i] = static_cast<std::uint8_t>(rng() % 4);
            occ[i] = labels[i] > 0;
        }
        expect_zero("balanced_bce", [&](Tape& t) { return loss::balanced_bce(t.constant(hard_logits(occ, 2)), occ, all, {}); });
        expect_zero("weighted_ce", [&](Tape& t) { return loss::weighted_ce(t.constant(hard_logits(labels, 4)), labels, all, {}); });
        expect_zero("sem_scal", [&](Tape& t) { return loss::sem_scal(t.constant(hard_logits(labels, 4)), labels, all); });
        const auto ratio = uniform({16}, rng, 0.1, 3.0);
        expect_zero("neg_log_ratio", [&](Tape& t) { return loss::neg_log_ratio(t.constant(ratio), t.constant(ratio), Mask(16, 1)); });
        const double s0 = 1.3;
        expect_zero("sigma_reg", [&](Tape& t) { return loss::sigma_reg(t.constant(NdBuffer({32, 2}, s0)), s0); });
        expect_zero("delta_reg", [&](Tape& t) { return loss::delta_reg(t.constant(NdBuffer({32, 2}, 0.0))); });

        Tape t;
        const auto a = t.constant(uniform({6, 5, 3}, rng, -1, 1)), b = t.constant(uniform({6, 5, 3}, rng, -1, 1));
        if (!bit_equal(refine::blend(a, b, 1.0).value(), a.value()))
            broken.push_back("blend(1)");
        if (!bit_equal(refine::blend(a, b, 0.0).value(), b.value()))
            broken.push_back("blend(0)");

        const auto plane = uniform({9, 8, 3}, rng, -1, 1);
        const auto theta = uniform({72, 2}, rng, 0.3, 3.0);
        const auto alpha = uniform({72}, rng, 0.01, 1.0);
        const auto base = refine::global_aggregate(t.constant(plane), t.constant(theta), t.constant(alpha)).value();
        for (double c : {0.125, 0.5, 2.0, 1024.0}) {
            auto scaled = alpha;
            for (auto& v : scaled.storage())
                v *= c;
            if (!bit_equal(base, refine::global_aggregate(t.constant(plane), t.constant(theta), t.constant(scaled)).value()))
                broken.push_back(fmt::format("alpha x{}", c));
        }
        std::string list;
        for (const auto& s : broken)
            list += (list.empty() ? "" : ", ") + s;
        return {broken.empty(),
                broken.empty() ? "losses 0 at perfect predictions, sigma_reg(sigma0) = 0, delta_reg(0) = 0, blend "
                                 "endpoints and power-of-two alpha rescaling bit-exact"
                               : "not exact: " + list};
    }

    // ---------------------------------------------------------------- 5, 6

    struct Reached {
        int step = -1;
        double value = 0.0;
        double best = 0.0;
    };

    Reached first_reaching(const std::vector<std::string>& lines, const char* key, double target) {
        Reached r;
        for (const auto& line : lines) {
            const auto j = nlohmann::json::parse(line);
            const double v = j[key].get<double>();
            r.best = std::max(r.best, v);
            if (r.step < 0 && v >= target) {
                r.step = j["step"].get<int>();
                r.value = v;
            }
        }
        return r;
    }

    cli::RunConfig desk_config(int stage, int steps, int eval_interval) {
        cli::RunConfig cfg;
        cfg.stage = stage;
        cfg.steps = steps;
        cfg.eval_interval = eval_interval;
        cfg.optimizer.lr = 3e-3;
        return cfg;
    }

    Outcome desk_stage1() {
        const auto cfg = desk_config(1, 200, 25);
        const auto t0 = Clock::now();
        const auto suite = cli::build_suite(cfg);
        auto model = cli::make_stage1_model(cfg);
        const auto res = cli::train_stage1(cfg, suite, model);
        const double secs = seconds_since(t0);
        const auto r = first_reaching(res.metric_lines, "iou", 0.9);
        return {r.step >= 0 && r.step <= 2000 && secs <= 300.0,
                r.step < 0 ? fmt::format("held-out IoU never reached 0.90 (best {:.4f}) in {} steps", r.best, res.steps)
                           : fmt::format("held-out IoU {:.4f} >= 0.90 at step {} (<= 2000); run of {} steps took {:.0f} s "
                                         "(<= 300 s)",
                                         r.value, r.step, res.steps, secs)};
    }

    Outcome desk_stage2() {
        const auto cfg = desk_config(2, 100, 25);
        const auto t0 = Clock::now();
        const auto suite = cli::build_suite(cfg);
        auto model = cli::make_stage2_model(cfg);
        const auto res = cli::train_stage2(cfg, suite, model, nullptr);
        const double secs = seconds_since(t0);
        const auto r = first_reaching(res.metric_lines, "miou", 0.8);
        return {r.step >= 0 && r.step <= 2000 && secs <= 300.0,
                r.step < 0 ? fmt::format("held-out mIoU never reached 0.80 (best {:.4f}) in {} steps", r.best, res.steps)
                           : fmt::format("held-out mIoU {:.4f} >= 0.80 at step {} (<= 2000), ground-truth gating; run of "
                                         "{} steps took {:.0f} s (<= 300 s)",
                                         r.value, r.step, res.steps, secs)};
    }

    // ---------------------------------------------------------------- 7, 8

    cli::RunConfig reduced_config(int stage) {
        cli::RunConfig cfg;
        cfg.stage = stage;
        cfg.grid_dims = {32, 32, 8};
        cfg.train_scenes = 4;
        cfg.heldout_scenes = 2;
        cfg.steps = 150;
        cfg.eval_interval = 150;
        cfg.optimizer.lr = 3e-3;
        return cfg;
    }

    Outcome anchoring_direction() {
        std::string detail;
        bool all = true;
        for (std::uint64_t seed = 0; seed < 3; ++seed) {
            auto cfg = reduced_config(1);
            cfg.seed = seed;
            cfg.queries.jitter = 0.5;
            const auto suite = cli::build_suite(cfg);
            double iou[2];
            for (int m = 0; m < 2; ++m) {
                cfg.anchor_mode = m == 0 ? anchor::AnchorMode::Gaussian : anchor::AnchorMode::Point;
                auto model = cli::make_stage1_model(cfg);
                iou[m] = cli::train_stage1(cfg, suite, model).heldout.iou;
            }
            const double margin = iou[0] - iou[1];
            all = all && margin >= 0.0;
            detail += fmt::format("{}seed {}: gaussian {:.4f} point {:.4f} margin {:+.4f}", seed ? "; " : "", seed, iou[0],
                                  iou[1], margin);
        }
        return {all, detail + " (margin >= 0 on every seed, jitter 0.5)"};
    }

    Outcome beta_matrix() {
        auto cfg = reduced_config(2);
        cfg.steps = 40;
        cfg.eval_interval = 40;
        const auto suite = cli::build_suite(cfg);
        const auto a = cli::ablation_csv(cli::run_beta_ablation(cfg, suite));
        const auto b = cli::ablation_csv(cli::run_beta_ablation(cfg, suite));
        std::istringstream in(a);
        std::string line;
        std::vector<std::string> lines;
        while (std::getline(in, line))
            lines.push_back(line);
        bool schema = lines.size() == 4 && lines[0] == "name,recall,precision,iou,miou";
        const char* names[] = {"stage2_beta_0", "stage2_beta_0.5", "stage2_beta_1"};
        for (std::size_t i = 1; schema && i < 4; ++i)
            schema = lines[i].rfind(std::string(names[i - 1]) + ",", 0) == 0 &&
                     std::count(lines[i].begin(), lines[i].end(), ',') == 4;
        return {schema && a == b, fmt::format("3 rows, CSV schema {}, repeat run {}", schema ? "ok" : "wrong",
                                              a == b ? "byte-identical" : "differs")};
    }

    // ---------------------------------------------------------------- 9

    Outcome metric_oracle() {
        std::mt19937_64 rng(99);
        const std::size_t n = 8 * 8 * 4, classes = 4;
        int mismatches = 0;
        for (int trial = 0; trial < 100; ++trial) {
            Mask gt(n), pred(n);
            for (std::size_t i = 0; i < n; ++i) {
                gt[i] = rng() % 5 == 0 ? geom::kUnknownLabel : static_cast<std::uint8_t>(rng() % classes);
                pred[i] = static_cast<std::uint8_t>(rng() % classes);
            }
            metrics::Confusion c(classes);
            c.add(pred, gt);
            const auto report = metrics::semantic_report(c);
            auto ratio = [](std::uint64_t num, std::uint64_t den) {
                return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
            };
            double miou = 0.0;
            for (std::size_t k = 0; k < classes; ++k) {
                std::uint64_t tp = 0, fp = 0, fn = 0;
                for (std::size_t i = 0; i < n; ++i) {
                    if (gt[i] == geom::kUnknownLabel)
                        continue;
                    tp += gt[i] == k && pred[i] == k;
                    fp += gt[i] != k && pred[i] == k;
                    fn += gt[i] == k && pred[i] != k;
                }
                const double v = ratio(tp, tp + fp + fn);
                mismatches += report.per_class_iou[k] != v;
                if (k > 0)
                    miou += v;
            }
            mismatches += *report.miou != miou / static_cast<double>(classes - 1);
            std::uint64_t tp = 0, fp = 0, fn = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (gt[i] == geom::kUnknownLabel)
                    continue;
                tp += gt[i] > 0 && pred[i] > 0;
                fp += gt[i] == 0 && pred[i] > 0;
                fn += gt[i] > 0 && pred[i] == 0;
            }
            mismatches += report.iou != ratio(tp, tp + fp + fn);
            mismatches += report.precision != ratio(tp, tp + fp);
            mismatches += report.recall != ratio(tp, tp + fn);
        }
        return {mismatches == 0, fmt::format("{} mismatching values over 100 volumes with ~20% UNKNOWN", mismatches)};
    }

    // ---------------------------------------------------------------- 10

    Outcome cli_determinism() {
        const auto root = fs::temp_directory_path() / "gssc_acceptance_det";
        fs::remove_all(root);
        fs::create_directories(root);
        {
            std::ofstream cfg(root / "run.cfg");
            cfg << "grid_x = 24\ngrid_y = 24\ngrid_z = 6\ntrain_scenes = 2\nheldout_scenes = 1\n"
                   "steps = 12\neval_interval = 4\nlr = 3e-3\n";
        }
        std::vector<std::string> logs;
        bool ok = true;
        for (int stage : {1, 2})
            for (int threads : {1, 1, 4}) {
                const auto out = root / fmt::format("s{}_t{}_{}", stage, threads, logs.size());
                const std::string cfg = (root / "run.cfg").string(), dir = out.string(), st = std::to_string(stage),
                                  th = std::to_string(threads),
                                  ckpt = (out / fmt::format("stage{}.gssc", stage)).string();
                std::ostringstream sink;
                const char* train[] = {"gaussianssc", "train", "--config", cfg.c_str(), "--stage", st.c_str(),
                                       "--threads", th.c_str(), "--out", dir.c_str()};
                const char* eval[] = {"gaussianssc", "eval", "--config", cfg.c_str(), "--stage", st.c_str(),
                                      "--threads", th.c_str(), "--out", dir.c_str(), "--checkpoint", ckpt.c_str()};
                ok = ok && cli::run_cli(10, train, sink, sink) == 0 && cli::run_cli(12, eval, sink, sink) == 0;
                set_num_threads(1);
                logs.push_back(read_file(out / "metrics.jsonl") + read_file(out / "eval.jsonl"));
            }
        bool same = ok;
        for (std::size_t g = 0; g < 2; ++g)
            for (std::size_t i = 1; i < 3; ++i)
                same = same && !logs[3 * g].empty() && logs[3 * g + i] == logs[3 * g];
        fs::remove_all(root);
        return {same, fmt::format("stage 1 and 2 train+eval logs at threads 1, 1, 4: {}",
                                  !ok ? "a run failed" : (same ? "byte-identical" : "differ"))};
    }

} // namespace

int main() {
    set_num_threads(1);
    const std::pair<const char*, std::function<Outcome()>> criteria[] = {
        {"gradient suite", gradient_suite},
        {"normalization invariants", normalization},
        {"oracle equivalence", oracles},
        {"formula fixed points", fixed_points},
        {"desk-scale stage 1", desk_stage1},
        {"desk-scale stage 2", desk_stage2},
        {"anchoring direction", anchoring_direction},
        {"beta ablation matrix", beta_matrix},
        {"metric oracle", metric_oracle},
        {"determinism", cli_determinism},
    };
    int failed = 0, index = 0;
    for (const auto& [name, run] : criteria) {
        ++index;
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        failed += !o.pass;
        fmt::print("{} {:2d} {}: {}\n", o.pass ? "PASS" : "FAIL", index, name, o.detail);
        std::fflush(stdout);
    }
    fmt::print("{}/{} criteria passed\n", index - failed, index);
    return failed == 0 ? 0 : 1;
}
