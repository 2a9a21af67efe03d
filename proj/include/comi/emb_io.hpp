// Copyright (C) 2026 The comi authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "comi/error.hpp"

namespace comi {

enum class Role : std::uint8_t {
    context = 0,
    query = 1,
    compressed = 2,
};

inline const char* role_name(Role role) {
    switch (role) {
    case Role::context: return "context";
    case Role::query: return "query";
    case Role::compressed: return "compressed";
    }
    return "unknown";
}

/**
 * @brief Dense row-major matrix of token hidden states.
 *
 * Row i is the hidden state of token i; row order is token order. Entries are
 * 32-bit floats so the in-memory layout matches the `.cemb` payload one to one.
 */
class EmbeddingMatrix {
public:
    EmbeddingMatrix() = default;

    EmbeddingMatrix(Role role, std::size_t rows, std::size_t cols)
        : role_(role), rows_(rows), cols_(cols), data_(rows * cols, 0.0f) {
        require(cols >= 1, ErrorKind::shape, "embedding matrix needs at least one column");
    }

    EmbeddingMatrix(Role role, std::size_t rows, std::size_t cols, std::vector<float> data)
        : role_(role), rows_(rows), cols_(cols), data_(std::move(data)) {
        require(cols >= 1, ErrorKind::shape, "embedding matrix needs at least one column");
        require(data_.size() == rows * cols, ErrorKind::shape,
                "payload has " + std::to_string(data_.size()) + " values, expected " +
                    std::to_string(rows * cols));
    }

    /// Builds a matrix from nested rows; all rows must share one width.
    static EmbeddingMatrix from_rows(Role role, const std::vector<std::vector<float>>& rows) {
        require(!rows.empty(), ErrorKind::shape, "from_rows needs at least one row to fix the width");
        const std::size_t cols = rows.front().size();
        std::vector<float> data;
        data.reserve(rows.size() * cols);
        for (const auto& row : rows) {
            require(row.size() == cols, ErrorKind::shape, "ragged rows");
            data.insert(data.end(), row.begin(), row.end());
        }
        return EmbeddingMatrix(role, rows.size(), cols, std::move(data));
    }

    Role role() const noexcept { return role_; }
    void set_role(Role role) noexcept { role_ = role; }
    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return rows_ == 0; }

    std::span<const float> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
    std::span<float> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }

    std::span<const float> data() const noexcept { return data_; }
    std::span<float> data() noexcept { return data_; }

    /// Index of the first non-finite entry, or rows*cols if all are finite.
    std::size_t first_non_finite() const noexcept {
        for (std::size_t i = 0; i < data_.size(); ++i) {
            if (!std::isfinite(data_[i])) {
                return i;
            }
        }
        return data_.size();
    }

    friend bool operator==(const EmbeddingMatrix& a, const EmbeddingMatrix& b) {
        if (a.role_ != b.role_ || a.rows_ != b.rows_ || a.cols_ != b.cols_) {
            return false;
        }
        // Bitwise: the format is bit-exact, so -0.0f and 0.0f are distinct here.
        return a.data_.empty() ||
               std::memcmp(a.data_.data(), b.data_.data(), a.data_.size() * sizeof(float)) == 0;
    }

private:
    Role role_ = Role::context;
    std::size_t rows_ = 0;
    std::size_t cols_ = 1;
    std::vector<float> data_;
};

/// Contiguous run of rows inside a larger matrix; `offset` is the index of the
/// first row in the owning matrix so results can be reported in global positions.
struct RowSlice {
    const EmbeddingMatrix* matrix = nullptr;
    std::size_t offset = 0;
    std::size_t count = 0;

    std::size_t size() const noexcept { return count; }
    bool empty() const noexcept { return count == 0; }
    std::size_t cols() const noexcept { return matrix->cols(); }
    std::span<const float> row(std::size_t k) const { return matrix->row(offset + k); }
};

inline RowSlice slice(const EmbeddingMatrix& m, std::size_t offset, std::size_t count) {
    require(offset + count <= m.rows(), ErrorKind::shape, "row slice exceeds matrix");
    return RowSlice{&m, offset, count};
}

inline RowSlice all_rows(const EmbeddingMatrix& m) { return RowSlice{&m, 0, m.rows()}; }

namespace cemb {

inline constexpr std::array<char, 4> kMagic = {'C', 'E', 'M', 'B'};
inline constexpr std::uint32_t kVersion = 1;
inline constexpr std::uint8_t kDtypeF32 = 0;
inline constexpr std::size_t kHeaderSize = 26;

namespace detail {

template <typename T>
void put_le(std::vector<unsigned char>& out, T value) {
    using U = std::make_unsigned_t<T>;
    auto u = static_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        out.push_back(static_cast<unsigned char>(u & 0xffu));
        u = static_cast<U>(u >> 8);
    }
}

template <typename T>
T get_le(const unsigned char* in) {
    T value = 0;
    for (std::size_t i = sizeof(T); i-- > 0;) {
        value = static_cast<T>((value << 8) | in[i]);
    }
    return value;
}

}  // namespace detail

}  // namespace cemb

/**
 * Serializes `m` as a `.cemb` stream: 26-byte little-endian header followed by
 * the row-major float32 payload. Output depends only on the matrix contents.
 */
inline void write_embeddings(const EmbeddingMatrix& m, std::ostream& sink) {
    const std::size_t bad = m.first_non_finite();
    require(bad == m.data().size(), ErrorKind::validation,
            "non-finite entry at row " + std::to_string(bad / m.cols()) + ", column " +
                std::to_string(bad % m.cols()));

    std::vector<unsigned char> bytes;
    bytes.reserve(cemb::kHeaderSize + m.data().size() * 4);
    bytes.insert(bytes.end(), cemb::kMagic.begin(), cemb::kMagic.end());
    cemb::detail::put_le<std::uint32_t>(bytes, cemb::kVersion);
    bytes.push_back(static_cast<unsigned char>(m.role()));
    bytes.push_back(cemb::kDtypeF32);
    cemb::detail::put_le<std::uint64_t>(bytes, m.rows());
    cemb::detail::put_le<std::uint64_t>(bytes, m.cols());
    for (float v : m.data()) {
        cemb::detail::put_le<std::uint32_t>(bytes, std::bit_cast<std::uint32_t>(v));
    }

    sink.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    sink.flush();
    require(static_cast<bool>(sink), ErrorKind::io, "failed writing embedding stream");
}

inline EmbeddingMatrix read_embeddings(std::istream& source) {
    std::array<unsigned char, cemb::kHeaderSize> header{};
    source.read(reinterpret_cast<char*>(header.data()), header.size());
    if (source.bad()) {
        fail(ErrorKind::io, "failed reading embedding header");
    }
    require(static_cast<std::size_t>(source.gcount()) == header.size(), ErrorKind::truncation,
            "stream ends inside the 26-byte header");
    require(std::memcmp(header.data(), cemb::kMagic.data(), 4) == 0, ErrorKind::format,
            "bad magic, expected \"CEMB\"");

    const auto version = cemb::detail::get_le<std::uint32_t>(header.data() + 4);
    require(version == cemb::kVersion, ErrorKind::format, "unsupported version " + std::to_string(version));
    const std::uint8_t role = header[8];
    require(role <= 2, ErrorKind::format, "unknown role byte " + std::to_string(role));
    const std::uint8_t dtype = header[9];
    require(dtype == cemb::kDtypeF32, ErrorKind::format,
            "unsupported dtype " + std::to_string(dtype) + " (only float32 is accepted)");
    const auto rows = cemb::detail::get_le<std::uint64_t>(header.data() + 10);
    const auto cols = cemb::detail::get_le<std::uint64_t>(header.data() + 18);
    require(cols >= 1, ErrorKind::format, "cols must be at least 1");
    require(rows <= std::numeric_limits<std::uint64_t>::max() / cols / 4, ErrorKind::format,
            "rows x cols overflows");

    // Read row by row so a lying header cannot force a huge allocation up front.
    std::vector<float> data;
    std::vector<unsigned char> buffer(cols * 4);
    for (std::uint64_t r = 0; r < rows; ++r) {
        source.read(reinterpret_cast<char*>(buffer.data()), static_cast<std::streamsize>(buffer.size()));
        if (source.bad()) {
            fail(ErrorKind::io, "failed reading embedding payload");
        }
        require(static_cast<std::size_t>(source.gcount()) == buffer.size(), ErrorKind::truncation,
                "payload ends in row " + std::to_string(r) + " of " + std::to_string(rows));
        for (std::uint64_t c = 0; c < cols; ++c) {
            const float v = std::bit_cast<float>(cemb::detail::get_le<std::uint32_t>(buffer.data() + c * 4));
            require(std::isfinite(v), ErrorKind::validation,
                    "non-finite entry at row " + std::to_string(r) + ", column " + std::to_string(c));
            data.push_back(v);
        }
    }
    require(source.peek() == std::char_traits<char>::eof(), ErrorKind::truncation,
            "payload longer than rows x cols x 4 bytes");

    return EmbeddingMatrix(static_cast<Role>(role), rows, cols, std::move(data));
}

inline void write_embeddings_file(const EmbeddingMatrix& m, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorKind::io, "cannot open " + path.string() + " for writing");
    write_embeddings(m, out);
}

inline EmbeddingMatrix read_embeddings_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorKind::io, "cannot open " + path.string());
    return read_embeddings(in);
}

}  // namespace comi
