/* SPDX-FileCopyrightText: 2026 GaussianSSC Authors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#include "gssc/metrics.hpp"
#include "gssc/error.hpp"
#include "gssc/geometry.hpp"

#include <fmt/format.h>
#include <json.hpp>

namespace gssc::metrics {

    double iou(const ClassCounts& c) {
        const auto den = c.tp + c.fp + c.fn;
        return den == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(den);
    }

    double precision(const ClassCounts& c) {
        const auto den = c.tp + c.fp;
        return den == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(den);
    }

    double recall(const ClassCounts& c) {
        const auto den = c.tp + c.fn;
        return den == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(den);
    }

    Confusion::Confusion(std::size_t num_classes) : classes_(num_classes), counts_(num_classes * num_classes, 0) {
        if (num_classes < 2)
            throw ConfigError(fmt::format("need at least 2 classes (got {})", num_classes));
    }

    void Confusion::add(const std::vector<std::uint8_t>& pred, const std::vector<std::uint8_t>& gt,
                        const std::vector<std::uint8_t>* mask) {
        if (pred.size() != gt.size() || (mask && mask->size() != gt.size()))
            throw DimensionError(fmt::format("confusion: {} predictions, {} labels, {} mask entries", pred.size(),
                                             gt.size(), mask ? mask->size() : gt.size()));
        for (std::size_t i = 0; i < gt.size(); ++i) {
            if (gt[i] == geom::kUnknownLabel || (mask && !(*mask)[i]))
                continue;
            if (gt[i] >= classes_ || pred[i] >= classes_)
                throw IndexError(fmt::format("confusion: voxel {} has label {} / prediction {} outside {} classes", i,
                                             gt[i], pred[i], classes_));
            ++counts_[gt[i] * classes_ + pred[i]];
            ++valid_;
        }
    }

    ClassCounts Confusion::counts(std::size_t c) const {
        if (c >= classes_)
            throw IndexError(fmt::format("class {} outside {} classes", c, classes_));
        ClassCounts out;
        for (std::size_t g = 0; g < classes_; ++g)
            for (std::size_t p = 0; p < classes_; ++p) {
                const auto n = at(g, p);
                if (g == c && p == c)
                    out.tp += n;
                else if (p == c)
                    out.fp += n;
                else if (g == c)
                    out.fn += n;
                else
                    out.tn += n;
            }
        return out;
    }

    ClassCounts Confusion::occupancy() const {
        ClassCounts out;
        for (std::size_t g = 0; g < classes_; ++g)
            for (std::size_t p = 0; p < classes_; ++p) {
                const auto n = at(g, p);
                const bool go = g != geom::kEmptyLabel, po = p != geom::kEmptyLabel;
                if (go && po)
                    out.tp += n;
                else if (po)
                    out.fp += n;
                else if (go)
                    out.fn += n;
                else
                    out.tn += n;
            }
        return out;
    }

    double Confusion::miou() const {
        double acc = 0.0;
        for (std::size_t c = 1; c < classes_; ++c)
            acc += iou(counts(c));
        return acc / static_cast<double>(classes_ - 1);
    }

    Report occupancy_report(const Confusion& c) {
        const auto occ = c.occupancy();
        return {iou(occ), precision(occ), recall(occ), std::nullopt, {}};
    }

    Report semantic_report(const Confusion& c) {
        Report r = occupancy_report(c);
        r.miou = c.miou();
        for (std::size_t k = 0; k < c.num_classes(); ++k)
            r.per_class_iou.push_back(iou(c.counts(k)));
        return r;
    }

    std::string json_line(std::int64_t step, const std::string& split, const Report& r) {
        nlohmann::ordered_json j;
        j["step"] = step;
        j["split"] = split;
        j["iou"] = r.iou;
        j["precision"] = r.precision;
        j["recall"] = r.recall;
        j["miou"] = r.miou ? nlohmann::ordered_json(*r.miou) : nlohmann::ordered_json(nullptr);
        j["per_class_iou"] = r.per_class_iou;
        return j.dump();
    }

} // namespace gssc::metrics
