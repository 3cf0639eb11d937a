/* SPDX-FileCopyrightText: 2026 GaussianSSC Authors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace gssc {

    using Shape = std::vector<std::size_t>;

    std::string shape_string(const Shape& shape);
    std::size_t shape_size(const Shape& shape);

    /// Dense row-major buffer of 64-bit floats. Every extent is at least 1.
    class NdBuffer {
    public:
        NdBuffer();
        explicit NdBuffer(Shape shape, double fill = 0.0);
        NdBuffer(Shape shape, std::vector<double> data);

        static NdBuffer scalar(double value);
        static NdBuffer vector(std::vector<double> values);
        static NdBuffer matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

        [[nodiscard]] const Shape& shape() const { return shape_; }
        [[nodiscard]] std::size_t rank() const { return shape_.size(); }
        [[nodiscard]] std::size_t dim(std::size_t axis) const;
        [[nodiscard]] std::size_t size() const { return data_.size(); }

        /// Rows/cols when the buffer is viewed as [prod(shape[:-1]) x shape[-1]].
        [[nodiscard]] std::size_t rows() const;
        [[nodiscard]] std::size_t cols() const;

        [[nodiscard]] std::span<double> data() { return data_; }
        [[nodiscard]] std::span<const double> data() const { return data_; }
        [[nodiscard]] double* ptr() { return data_.data(); }
        [[nodiscard]] const double* ptr() const { return data_.data(); }
        [[nodiscard]] std::vector<double>& storage() { return data_; }
        [[nodiscard]] const std::vector<double>& storage() const { return data_; }

        double& operator[](std::size_t i) { return data_[i]; }
        double operator[](std::size_t i) const { return data_[i]; }

        double& at(std::size_t i, std::size_t j) { return data_[i * shape_.back() + j]; }
        double at(std::size_t i, std::size_t j) const { return data_[i * shape_.back() + j]; }

        [[nodiscard]] NdBuffer reshaped(Shape shape) const;
        void fill(double value);

        friend bool operator==(const NdBuffer& a, const NdBuffer& b) = default;

    private:
        Shape shape_;
        std::vector<double> data_;
    };

    /// Throws DimensionError naming both shapes when they differ.
    void require_same_shape(const NdBuffer& a, const NdBuffer& b, const char* what);

} // namespace gssc
