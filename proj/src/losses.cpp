/* SPDX-FileCopyrightText: 2026 GaussianSSC Authors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#include "gssc/losses.hpp"
#include "gssc/error.hpp"
#include "gssc/geometry.hpp"
#include "gssc/ops.hpp"

#include <fmt/format.h>

#include <cmath>
#include <random>

namespace gssc::loss {

    namespace {
        void check_lengths(const char* op, std::size_t rows, std::size_t a, std::size_t b) {
            if (a != rows || b != rows)
                throw DimensionError(fmt::format("{}: {} rows but label/mask lengths {} and {}", op, rows, a, b));
        }

        std::vector<std::int32_t> selected_rows(const std::vector<std::uint8_t>& mask) {
            std::vector<std::int32_t> rows;
            for (std::size_t i = 0; i < mask.size(); ++i)
                if (mask[i])
                    rows.push_back(static_cast<std::int32_t>(i));
            return rows;
        }
    } // namespace

    void Stage1LossWeights::validate() const {
        if (!(w0 > 0.0 && w1 > 0.0))
            throw ConfigError(fmt::format("class weights must be positive (w0 = {}, w1 = {})", w0, w1));
        if (!(lambda_sigma >= 0.0 && lambda_delta >= 0.0))
            throw ConfigError("regularizer weights must be non-negative");
        if (!(sigma0 > 0.0))
            throw ConfigError(fmt::format("sigma0 must be positive (got {})", sigma0));
        if (!(neg_ratio > 0.0))
            throw ConfigError(fmt::format("negative sampling ratio must be positive (got {})", neg_ratio));
    }

    void Stage2LossWeights::validate(std::size_t num_classes) const {
        if (!class_weights.empty() && class_weights.size() != num_classes)
            throw ConfigError(fmt::format("{} class weights for {} classes", class_weights.size(), num_classes));
        for (double w : class_weights)
            if (!(w > 0.0))
                throw ConfigError(fmt::format("class weights must be positive (got {})", w));
        if (!(lambda_ce >= 0.0 && lambda_sem >= 0.0))
            throw ConfigError("loss weights must be non-negative");
    }

    Var balanced_bce(Var logits, const std::vector<std::uint8_t>& occupied, const std::vector<std::uint8_t>& mask,
                     const Stage1LossWeights& weights) {
        const auto& v = logits.value();
        if (v.rank() != 2 || v.cols() != 2)
            throw DimensionError(fmt::format("balanced_bce expects [N x 2] logits, got {}", shape_string(v.shape())));
        check_lengths("balanced_bce", v.rows(), occupied.size(), mask.size());
        auto rows = selected_rows(mask);
        if (rows.empty())
            throw ConfigError("balanced_bce: no valid voxels");
        NdBuffer w({rows.size(), 2}, 0.0);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (occupied[static_cast<std::size_t>(rows[i])])
                w[2 * i + 1] = -weights.w1;
            else
                w[2 * i] = -weights.w0;
        }
        return ops::dot(ops::log_softmax_rows(ops::gather_rows(logits, std::move(rows))), w);
    }

    Var sigma_reg(Var sigma, double sigma0) {
        if (!(sigma0 > 0.0))
            throw ConfigError(fmt::format("sigma0 must be positive (got {})", sigma0));
        return ops::sum(ops::square(ops::add_scalar(ops::log(sigma), -std::log(sigma0))));
    }

    Var delta_reg(Var delta) { return ops::sum(ops::abs(delta)); }

    std::vector<std::uint8_t> negative_sample(const std::vector<std::uint8_t>& occupied,
                                              const std::vector<std::uint8_t>& mask, double ratio, std::uint64_t seed) {
        if (!(ratio > 0.0))
            throw ConfigError(fmt::format("negative sampling ratio must be positive (got {})", ratio));
        if (occupied.size() != mask.size())
            throw DimensionError(fmt::format("negative_sample: {} labels, {} mask entries", occupied.size(), mask.size()));
        std::vector<std::uint8_t> keep(mask.size(), 0);
        std::vector<std::size_t> negatives;
        std::size_t positives = 0;
        for (std::size_t i = 0; i < mask.size(); ++i) {
            if (!mask[i])
                continue;
            if (occupied[i]) {
                keep[i] = 1;
                ++positives;
            } else {
                negatives.push_back(i);
            }
        }
        const double base = positives > 0 ? static_cast<double>(positives) : static_cast<double>(kNegativeFloor);
        const auto want = std::min(static_cast<std::size_t>(std::llround(ratio * base)), negatives.size());
        // Partial Fisher-Yates over the negatives.
        std::mt19937_64 rng(seed);
        for (std::size_t i = 0; i < want; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng() % (negatives.size() - i));
            std::swap(negatives[i], negatives[j]);
            keep[negatives[i]] = 1;
        }
        return keep;
    }

    Var weighted_ce(Var logits, const std::vector<std::uint8_t>& labels, const std::vector<std::uint8_t>& mask,
                    const Stage2LossWeights& weights) {
        const auto& v = logits.value();
        if (v.rank() != 2)
            throw DimensionError(fmt::format("weighted_ce expects [N x C] logits, got {}", shape_string(v.shape())));
        check_lengths("weighted_ce", v.rows(), labels.size(), mask.size());
        const std::size_t c = v.cols();
        weights.validate(c);
        auto rows = selected_rows(mask);
        if (rows.empty())
            throw ConfigError("weighted_ce: no valid voxels");
        NdBuffer w({rows.size(), c}, 0.0);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto y = labels[static_cast<std::size_t>(rows[i])];
            if (y >= c)
                throw IndexError(fmt::format("weighted_ce: label {} at voxel {} outside {} classes", y, rows[i], c));
            const double wy = weights.class_weights.empty() ? 1.0 : weights.class_weights[y];
            w[i * c + y] = -wy / static_cast<double>(rows.size());
        }
        return ops::dot(ops::log_softmax_rows(ops::gather_rows(logits, std::move(rows))), w);
    }

    Var neg_log_ratio(Var num, Var den, const std::vector<std::uint8_t>& select, double eps) {
        const std::size_t k = num.value().size();
        if (den.value().size() != k || select.size() != k)
            throw DimensionError(fmt::format("neg_log_ratio: {} numerators, {} denominators, {} selectors", k,
                                             den.value().size(), select.size()));
        double acc = 0.0;
        std::vector<std::uint8_t> active(k, 0);
        for (std::size_t i = 0; i < k; ++i) {
            if (!select[i])
                continue;
            const double r = num.value()[i] / den.value()[i];
            if (r > eps) {
                acc -= std::log(r);
                active[i] = 1;
            } else {
                acc -= std::log(eps);
            }
        }
        return num.tape->record("neg_log_ratio", NdBuffer::scalar(acc), {num, den},
                                [num, den, active](Tape& t, const NdBuffer& g) {
            NdBuffer* gn = t.grad_slot(num);
            NdBuffer* gd = t.grad_slot(den);
            for (std::size_t i = 0; i < active.size(); ++i) {
                if (!active[i])
                    continue;
                if (gn)
                    (*gn)[i] -= g[0] / t.value(num)[i];
                if (gd)
                    (*gd)[i] += g[0] / t.value(den)[i];
            }
        });
    }

    Var sem_scal(Var logits, const std::vector<std::uint8_t>& labels, const std::vector<std::uint8_t>& mask) {
        const auto& v = logits.value();
        if (v.rank() != 2)
            throw DimensionError(fmt::format("sem_scal expects [N x C] logits, got {}", shape_string(v.shape())));
        check_lengths("sem_scal", v.rows(), labels.size(), mask.size());
        const std::size_t c = v.cols();
        auto rows = selected_rows(mask);
        Tape& tape = *logits.tape;
        if (rows.empty())
            return tape.constant(NdBuffer::scalar(0.0));
        const std::size_t n = rows.size();
        NdBuffer onehot({n, c}, 0.0);
        std::vector<double> gt_count(c, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto y = labels[static_cast<std::size_t>(rows[i])];
            if (y >= c)
                throw IndexError(fmt::format("sem_scal: label {} at voxel {} outside {} classes", y, rows[i], c));
            onehot[i * c + y] = 1.0;
            gt_count[y] += 1.0;
        }
        const Var probs = ops::softmax_rows(ops::gather_rows(logits, std::move(rows)));
        const Var ones = tape.constant(NdBuffer({1, n}, 1.0));
        const Var mass = ops::reshape(ops::matmul(ones, probs), {c});
        const Var hit = ops::reshape(ops::matmul(ones, ops::mul(probs, tape.constant(onehot))), {c});
        // Soft true negatives: (n - G_c) - M_c + T_c.
        std::vector<double> neg_count(c);
        for (std::size_t k = 0; k < c; ++k)
            neg_count[k] = static_cast<double>(n) - gt_count[k];
        const Var true_neg = ops::add(ops::sub(tape.constant(NdBuffer::vector(neg_count)), mass), hit);

        std::vector<std::uint8_t> use_prec(c, 0), use_rec(c, 0), use_spec(c, 0);
        std::size_t evaluable = 0;
        for (std::size_t k = 0; k < c; ++k) {
            const double m = mass.value()[k];
            if (gt_count[k] == 0.0 && m == 0.0)
                continue;
            ++evaluable;
            use_prec[k] = m > 0.0;
            use_rec[k] = gt_count[k] > 0.0;
            use_spec[k] = neg_count[k] > 0.0;
        }
        if (evaluable == 0)
            return tape.constant(NdBuffer::scalar(0.0));
        // Unused entries get a harmless denominator of 1.
        auto safe = [](std::vector<double> d) {
            for (auto& x : d)
                if (x == 0.0)
                    x = 1.0;
            return NdBuffer::vector(std::move(d));
        };
        Var total = neg_log_ratio(hit, mass, use_prec);
        total = ops::add(total, neg_log_ratio(hit, tape.constant(safe(gt_count)), use_rec));
        total = ops::add(total, neg_log_ratio(true_neg, tape.constant(safe(neg_count)), use_spec));
        return ops::scale(total, 1.0 / static_cast<double>(evaluable));
    }

} // namespace gssc::loss
