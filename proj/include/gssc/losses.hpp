/* SPDX-FileCopyrightText: 2026 GaussianSSC Authors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include "gssc/tape.hpp"

#include <cstdint>
#include <vector>

namespace gssc::loss {

    struct Stage1LossWeights {
        double w0 = 0.46;
        double w1 = 0.54;
        double lambda_sigma = 1e-3;
        double lambda_delta = 1e-4;
        double sigma0 = 1.0;
        double neg_ratio = 2.0;

        void validate() const;
    };

    struct Stage2LossWeights {
        std::vector<double> class_weights;  // one per class; empty means all 1
        double lambda_ce = 1.0;
        double lambda_sem = 1.0;

        void validate(std::size_t num_classes) const;
    };

    inline constexpr std::size_t kNegativeFloor = 256;
    inline constexpr double kLogEps = 1e-12;

    /// -sum_v [w1 1[o=1] log p_v + w0 1[o=0] log(1 - p_v)] over voxels with mask set,
    /// where p = softmax(logits)[:, 1]. logits is [N x 2]. Throws ConfigError
    /// when the mask selects nothing.
    Var balanced_bce(Var logits, const std::vector<std::uint8_t>& occupied, const std::vector<std::uint8_t>& mask,
                     const Stage1LossWeights& weights);

    /// sum ||log sigma - log sigma0||^2 over all rows.
    Var sigma_reg(Var sigma, double sigma0);
    /// sum ||delta||_1 over all rows.
    Var delta_reg(Var delta);

    /// Keeps every positive inside mask plus min(round(ratio * max(N_pos, floor)), N_neg)
    /// negatives drawn uniformly with the given seed; the floor only applies when
    /// there are no positives.
    std::vector<std::uint8_t> negative_sample(const std::vector<std::uint8_t>& occupied,
                                              const std::vector<std::uint8_t>& mask, double ratio, std::uint64_t seed);

    /// Mean over masked voxels of w_y * CE(softmax(z_v), y_v). logits [N x C].
    Var weighted_ce(Var logits, const std::vector<std::uint8_t>& labels, const std::vector<std::uint8_t>& mask,
                    const Stage2LossWeights& weights);

    /// Soft precision, recall and specificity per class from probability
    /// masses, each turned into -log(max(x, eps)), averaged over classes present
    /// in the labels or carrying prediction mass. Terms with a zero denominator
    /// are left out.
    Var sem_scal(Var logits, const std::vector<std::uint8_t>& labels, const std::vector<std::uint8_t>& mask);

    /// -sum_k [sel_k] log(max(num_k / den_k, eps)) for rank-1 num, den.
    Var neg_log_ratio(Var num, Var den, const std::vector<std::uint8_t>& select, double eps = kLogEps);

} // namespace gssc::loss
