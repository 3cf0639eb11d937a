/* SPDX-FileCopyrightText: 2026 GaussianSSC Authors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#include "gssc/ndbuffer.hpp"
#include "gssc/error.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <algorithm>
#include <functional>
#include <numeric>

namespace gssc {

    std::string shape_string(const Shape& shape) {
        return fmt::format("[{}]", fmt::join(shape, "x"));
    }

    std::size_t shape_size(const Shape& shape) {
        return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
    }

    namespace {
        void validate_shape(const Shape& shape) {
            if (shape.empty())
                throw DimensionError("NdBuffer shape must have rank >= 1");
            if (std::any_of(shape.begin(), shape.end(), [](std::size_t e) { return e == 0; }))
                throw DimensionError(fmt::format("NdBuffer extents must be >= 1, got {}", shape_string(shape)));
        }
    } // namespace

    NdBuffer::NdBuffer() : shape_{1}, data_(1, 0.0) {}

    NdBuffer::NdBuffer(Shape shape, double fill) : shape_(std::move(shape)) {
        validate_shape(shape_);
        data_.assign(shape_size(shape_), fill);
    }

    NdBuffer::NdBuffer(Shape shape, std::vector<double> data)
        : shape_(std::move(shape)),
          data_(std::move(data)) {
        validate_shape(shape_);
        if (shape_size(shape_) != data_.size())
            throw DimensionError(fmt::format("shape {} needs {} values, got {}",
                                             shape_string(shape_), shape_size(shape_), data_.size()));
    }

    NdBuffer NdBuffer::scalar(double value) { return NdBuffer({1}, std::vector<double>{value}); }

    NdBuffer NdBuffer::vector(std::vector<double> values) {
        const std::size_t n = values.size();
        return NdBuffer({n}, std::move(values));
    }

    NdBuffer NdBuffer::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
        return NdBuffer({rows, cols}, std::move(values));
    }

    std::size_t NdBuffer::dim(std::size_t axis) const {
        if (axis >= shape_.size())
            throw IndexError(fmt::format("axis {} out of range for shape {}", axis, shape_string(shape_)));
        return shape_[axis];
    }

    std::size_t NdBuffer::rows() const { return data_.size() / shape_.back(); }
    std::size_t NdBuffer::cols() const { return shape_.back(); }

    NdBuffer NdBuffer::reshaped(Shape shape) const {
        if (shape_size(shape) != data_.size())
            throw DimensionError(fmt::format("cannot reshape {} to {}", shape_string(shape_), shape_string(shape)));
        return NdBuffer(std::move(shape), data_);
    }

    void NdBuffer::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

    void require_same_shape(const NdBuffer& a, const NdBuffer& b, const char* what) {
        if (a.shape() != b.shape())
            throw DimensionError(fmt::format("{}: shape mismatch {} vs {}", what,
                                             shape_string(a.shape()), shape_string(b.shape())));
    }

} // namespace gssc
