/* SPDX-FileCopyrightText: 2026 GaussianSSC Authors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#include "gssc/gssc_file.hpp"
#include "gssc/error.hpp"

#include <fmt/format.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace gssc::io {

    namespace {
        constexpr char kMagic[4] = {'G', 'S', 'S', 'C'};

        void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
            for (int i = 0; i < 4; ++i)
                out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        }

        std::uint32_t get_u32(const std::vector<std::uint8_t>& in, std::size_t& pos) {
            if (pos + 4 > in.size())
                throw IoError("GSSC header is truncated");
            std::uint32_t v = 0;
            for (int i = 0; i < 4; ++i)
                v |= static_cast<std::uint32_t>(in[pos + i]) << (8 * i);
            pos += 4;
            return v;
        }
    } // namespace

    std::size_t GsscFile::element_count() const {
        std::size_t n = 1;
        for (auto e : extents)
            n *= e;
        return n;
    }

    void GsscFile::validate() const {
        const std::size_t n = element_count();
        const std::size_t have = dtype == DType::F64 ? f64.size() : u8.size();
        if (have != n)
            throw DimensionError(fmt::format("GSSC payload has {} elements, extents give {}", have, n));
    }

    GsscFile from_buffer(const NdBuffer& buffer) {
        GsscFile f;
        f.dtype = DType::F64;
        for (auto d : buffer.shape())
            f.extents.push_back(static_cast<std::uint32_t>(d));
        f.f64.assign(buffer.data().begin(), buffer.data().end());
        return f;
    }

    GsscFile from_labels(std::vector<std::uint8_t> labels, std::vector<std::uint32_t> extents) {
        GsscFile f;
        f.dtype = DType::U8;
        f.extents = std::move(extents);
        f.u8 = std::move(labels);
        f.validate();
        return f;
    }

    NdBuffer to_buffer(const GsscFile& file) {
        if (file.dtype != DType::F64)
            throw ConfigError("GSSC file holds labels, not f64 values");
        file.validate();
        Shape shape(file.extents.begin(), file.extents.end());
        return NdBuffer(std::move(shape), file.f64);
    }

    std::vector<std::uint8_t> encode(const GsscFile& file) {
        file.validate();
        static_assert(std::endian::native == std::endian::little, "GSSC payloads are written in host order");
        std::vector<std::uint8_t> out(kMagic, kMagic + 4);
        put_u32(out, kGsscVersion);
        put_u32(out, static_cast<std::uint32_t>(file.dtype));
        put_u32(out, static_cast<std::uint32_t>(file.extents.size()));
        for (auto e : file.extents)
            put_u32(out, e);
        if (file.dtype == DType::F64) {
            const auto* p = reinterpret_cast<const std::uint8_t*>(file.f64.data());
            out.insert(out.end(), p, p + file.f64.size() * sizeof(double));
        } else {
            out.insert(out.end(), file.u8.begin(), file.u8.end());
        }
        return out;
    }

    GsscFile decode(const std::vector<std::uint8_t>& bytes) {
        if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
            throw IoError("not a GSSC file (bad magic)");
        std::size_t pos = 4;
        const auto version = get_u32(bytes, pos);
        if (version != kGsscVersion)
            throw IoError(fmt::format("unsupported GSSC version {}", version));
        const auto code = get_u32(bytes, pos);
        if (code > 1)
            throw IoError(fmt::format("unknown GSSC dtype code {}", code));
        GsscFile f;
        f.dtype = static_cast<DType>(code);
        const auto rank = get_u32(bytes, pos);
        for (std::uint32_t i = 0; i < rank; ++i)
            f.extents.push_back(get_u32(bytes, pos));
        const std::size_t n = f.element_count();
        const std::size_t width = f.dtype == DType::F64 ? sizeof(double) : 1;
        if (bytes.size() - pos != n * width)
            throw IoError(fmt::format("GSSC payload is {} bytes, extents need {}", bytes.size() - pos, n * width));
        if (f.dtype == DType::F64) {
            f.f64.resize(n);
            std::memcpy(f.f64.data(), bytes.data() + pos, n * width);
        } else {
            f.u8.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end());
        }
        return f;
    }

    void write_gssc(const std::filesystem::path& path, const GsscFile& file) {
        const auto bytes = encode(file);
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out)
            throw IoError(fmt::format("cannot open {} for writing", path.string()));
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out)
            throw IoError(fmt::format("failed writing {}", path.string()));
    }

    GsscFile read_gssc(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in)
            throw IoError(fmt::format("cannot open {}", path.string()));
        std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        return decode(bytes);
    }

} // namespace gssc::io
