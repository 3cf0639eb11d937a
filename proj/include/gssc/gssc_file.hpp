/* SPDX-FileCopyrightText: 2026 GaussianSSC Authors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include "gssc/ndbuffer.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace gssc::io {

    inline constexpr std::uint32_t kGsscVersion = 1;

    enum class DType : std::uint32_t { F64 = 0, U8 = 1 };

    /// Binary array file: "GSSC", then version, dtype, rank and extents as
    /// little-endian u32, then the row-major payload.
    struct GsscFile {
        DType dtype = DType::F64;
        std::vector<std::uint32_t> extents;
        std::vector<double> f64;
        std::vector<std::uint8_t> u8;

        [[nodiscard]] std::size_t element_count() const;
        void validate() const;
    };

    GsscFile from_buffer(const NdBuffer& buffer);
    GsscFile from_labels(std::vector<std::uint8_t> labels, std::vector<std::uint32_t> extents);
    NdBuffer to_buffer(const GsscFile& file);

    std::vector<std::uint8_t> encode(const GsscFile& file);
    GsscFile decode(const std::vector<std::uint8_t>& bytes);

    /// Throws IoError when the file cannot be opened, written or parsed.
    void write_gssc(const std::filesystem::path& path, const GsscFile& file);
    GsscFile read_gssc(const std::filesystem::path& path);

} // namespace gssc::io
