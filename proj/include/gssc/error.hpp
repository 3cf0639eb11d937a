/* SPDX-FileCopyrightText: 2026 GaussianSSC Authors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include <stdexcept>
#include <string>

namespace gssc {

    class Error : public std::runtime_error {
    public:
        using std::runtime_error::runtime_error;
    };

    /// Shape or extent disagreement between operands.
    class DimensionError : public Error {
    public:
        using Error::Error;
    };

    class IndexError : public Error {
    public:
        using Error::Error;
    };

    /// Invalid hyperparameter, config key or config value.
    class ConfigError : public Error {
    public:
        using Error::Error;
    };

    /// Non-finite value where a finite one is required.
    class NumericError : public Error {
    public:
        using Error::Error;
    };

    class IoError : public Error {
    public:
        using Error::Error;
    };

} // namespace gssc
