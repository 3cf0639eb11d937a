/* SPDX-FileCopyrightText: 2026 GaussianSSC Authors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace gssc::metrics {

    /// Per-class counts over valid voxels.
    struct ClassCounts {
        std::uint64_t tp = 0;
        std::uint64_t fp = 0;
        std::uint64_t fn = 0;
        std::uint64_t tn = 0;
    };

    /// IoU, precision and recall from counts; each is 0 when its denominator is 0.
    double iou(const ClassCounts& c);
    double precision(const ClassCounts& c);
    double recall(const ClassCounts& c);

    /// Confusion matrix (rows ground truth, columns prediction) over voxels whose
    /// ground truth is not UNKNOWN and whose optional mask entry is set.
    class Confusion {
    public:
        explicit Confusion(std::size_t num_classes);

        void add(const std::vector<std::uint8_t>& pred, const std::vector<std::uint8_t>& gt,
                 const std::vector<std::uint8_t>* mask = nullptr);

        [[nodiscard]] std::size_t num_classes() const { return classes_; }
        [[nodiscard]] std::uint64_t at(std::size_t gt, std::size_t pred) const { return counts_[gt * classes_ + pred]; }
        [[nodiscard]] std::uint64_t valid() const { return valid_; }
        [[nodiscard]] ClassCounts counts(std::size_t c) const;
        /// Empty versus occupied (any class > 0).
        [[nodiscard]] ClassCounts occupancy() const;
        /// Mean IoU over classes 1..C-1.
        [[nodiscard]] double miou() const;

    private:
        std::size_t classes_;
        std::vector<std::uint64_t> counts_;
        std::uint64_t valid_ = 0;
    };

    struct Report {
        double iou = 0.0;
        double precision = 0.0;
        double recall = 0.0;
        std::optional<double> miou;  // absent for occupancy-only evaluation
        std::vector<double> per_class_iou;
    };

    Report occupancy_report(const Confusion& c);
    Report semantic_report(const Confusion& c);

    /// One JSON object on a single line: {step, split, iou, precision, recall, miou, per_class_iou}.
    std::string json_line(std::int64_t step, const std::string& split, const Report& r);

} // namespace gssc::metrics
