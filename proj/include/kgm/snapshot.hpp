/**
 * @file snapshot.hpp
 * @brief Binary field snapshots ("KGMF" format).
 *
 * Layout: magic "KGMF", version byte 1, then little-endian u32 n, f64 L,
 * f64 eps and n^3 f64 values in row-major (i,j,k) order.
 */
#pragma once

#include "kgm/errors.hpp"
#include "kgm/grid.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace kgm {

inline constexpr std::array<char, 4> snapshot_magic{'K', 'G', 'M', 'F'};
inline constexpr std::uint8_t snapshot_version = 1;

struct FieldSnapshot {
    Field field;
    double eps = 0.0;
};

namespace detail {

template <class T>
void put_le(std::vector<unsigned char>& out, T value) {
    using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
    const U bits = std::bit_cast<U>(value);
    for (std::size_t b = 0; b < sizeof(U); ++b) out.push_back(static_cast<unsigned char>(bits >> (8 * b)));
}

template <class T>
T get_le(const unsigned char* in) {
    using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
    U bits = 0;
    for (std::size_t b = 0; b < sizeof(U); ++b) bits |= static_cast<U>(in[b]) << (8 * b);
    return std::bit_cast<T>(bits);
}

} // namespace detail

inline void save_field(const Field& u, double eps, const std::filesystem::path& path) {
    std::vector<unsigned char> buf;
    buf.reserve(4 + 1 + 4 + 16 + 8 * u.size());
    buf.insert(buf.end(), snapshot_magic.begin(), snapshot_magic.end());
    buf.push_back(snapshot_version);
    detail::put_le(buf, static_cast<std::uint32_t>(u.grid().n()));
    detail::put_le(buf, u.grid().length());
    detail::put_le(buf, eps);
    for (double v : u.values()) detail::put_le(buf, v);
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("save_field: cannot open " + path.string());
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!os) throw IoError("save_field: write failed for " + path.string());
}

/**
 * Reads a snapshot. When `expected` is given the stored n and L must match it
 * and the field is placed on that grid; otherwise a new grid is created.
 */
inline FieldSnapshot load_field(const std::filesystem::path& path, const GridPtr& expected = nullptr) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("load_field: cannot open " + path.string());
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    if (is.bad()) throw IoError("load_field: read failed for " + path.string());

    constexpr std::size_t header = 4 + 1 + 4 + 8 + 8;
    if (buf.size() < header) throw FormatError("load_field: truncated header in " + path.string());
    if (!std::equal(snapshot_magic.begin(), snapshot_magic.end(), buf.begin()))
        throw FormatError("load_field: bad magic in " + path.string());
    if (buf[4] != snapshot_version)
        throw FormatError("load_field: unsupported version " + std::to_string(buf[4]) + " in " + path.string());
    const auto n = detail::get_le<std::uint32_t>(&buf[5]);
    const double length = detail::get_le<double>(&buf[9]);
    const double eps = detail::get_le<double>(&buf[17]);
    const std::uint64_t count = static_cast<std::uint64_t>(n) * n * n;
    if (buf.size() != header + 8 * count)
        throw FormatError("load_field: expected " + std::to_string(header + 8 * count) + " bytes for n = " +
                          std::to_string(n) + ", found " + std::to_string(buf.size()));
    if (expected && expected->n() != n)
        throw FormatError("load_field: grid size mismatch, file has n = " + std::to_string(n) + ", expected n = " +
                          std::to_string(expected->n()));
    if (expected && expected->length() != length)
        throw FormatError("load_field: grid length mismatch, file has L = " + std::to_string(length) +
                          ", expected L = " + std::to_string(expected->length()));

    GridPtr grid = expected;
    if (!grid) {
        try {
            grid = make_grid(n, length);
        } catch (const std::invalid_argument& e) {
            throw FormatError(std::string("load_field: invalid grid header: ") + e.what());
        }
    }
    std::vector<double> values(count);
    for (std::size_t i = 0; i < count; ++i) values[i] = detail::get_le<double>(&buf[header + 8 * i]);
    return {Field(grid, std::move(values)), eps};
}

} // namespace kgm
