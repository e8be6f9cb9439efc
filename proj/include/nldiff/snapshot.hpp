#pragma once

#include <zlib.h>

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "nldiff/error.hpp"
#include "nldiff/evolution.hpp"
#include "nldiff/grid.hpp"

namespace nldiff {

static_assert(std::endian::native == std::endian::little, "snapshot I/O assumes a little-endian host");

// Layout, little-endian:
//   0  char[8] magic "NLDSNAP\0"
//   8  u32     version
//  12  u32     n
//  16  f64     half_width
//  24  f64     time
//  32  u32     scheme
//  36  u32     crc32 of the payload bytes
//  40  u64     payload count (n * n)
//  48  f64[n*n] row-major values, x fastest
inline constexpr char kSnapshotMagic[8] = {'N', 'L', 'D', 'S', 'N', 'A', 'P', '\0'};
inline constexpr std::uint32_t kSnapshotVersion = 1;
inline constexpr std::size_t kSnapshotHeaderSize = 48;

struct SnapshotMeta {
    double time = 0.0;
    Scheme scheme = Scheme::exponential;
};

namespace detail {

template <class T>
void put(std::vector<unsigned char>& buf, std::size_t at, T v) {
    std::memcpy(buf.data() + at, &v, sizeof v);
}

template <class T>
T get(const std::vector<unsigned char>& buf, std::size_t at) {
    T v;
    std::memcpy(&v, buf.data() + at, sizeof v);
    return v;
}

inline std::uint32_t crc_of(const unsigned char* data, std::size_t len) {
    uLong crc = crc32(0L, Z_NULL, 0);
    while (len > 0) {
        const uInt chunk = static_cast<uInt>(std::min<std::size_t>(len, 1u << 30));
        crc = crc32(crc, data, chunk);
        data += chunk;
        len -= chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

}  // namespace detail

inline void snapshot_save(const Field2D& field, const std::string& path, const SnapshotMeta& meta = {}) {
    const std::size_t count = field.size();
    std::vector<unsigned char> buf(kSnapshotHeaderSize + count * sizeof(double));
    std::memcpy(buf.data(), kSnapshotMagic, 8);
    std::memcpy(buf.data() + kSnapshotHeaderSize, field.values().data(), count * sizeof(double));
    detail::put<std::uint32_t>(buf, 8, kSnapshotVersion);
    detail::put<std::uint32_t>(buf, 12, static_cast<std::uint32_t>(field.n()));
    detail::put<double>(buf, 16, field.grid().half_width);
    detail::put<double>(buf, 24, meta.time);
    detail::put<std::uint32_t>(buf, 32, static_cast<std::uint32_t>(meta.scheme));
    detail::put<std::uint32_t>(buf, 36, detail::crc_of(buf.data() + kSnapshotHeaderSize, count * sizeof(double)));
    detail::put<std::uint64_t>(buf, 40, static_cast<std::uint64_t>(count));

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw SnapshotError("cannot open " + path + " for writing");
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!os) throw SnapshotError("write failed for " + path);
}

inline Field2D snapshot_load(const std::string& path, SnapshotMeta* meta = nullptr) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw SnapshotError("cannot open " + path);
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());

    if (buf.size() < kSnapshotHeaderSize) throw SnapshotCorrupt(path + ": truncated header");
    if (std::memcmp(buf.data(), kSnapshotMagic, 8) != 0) throw SnapshotCorrupt(path + ": bad magic");
    const auto version = detail::get<std::uint32_t>(buf, 8);
    if (version != kSnapshotVersion)
        throw SnapshotIncompatible(path + ": snapshot version " + std::to_string(version) + ", expected " +
                                   std::to_string(kSnapshotVersion));
    const auto n = detail::get<std::uint32_t>(buf, 12);
    const auto half_width = detail::get<double>(buf, 16);
    const auto count = detail::get<std::uint64_t>(buf, 40);
    if (count != static_cast<std::uint64_t>(n) * n) throw SnapshotCorrupt(path + ": payload count does not match n");
    if (buf.size() != kSnapshotHeaderSize + count * sizeof(double))
        throw SnapshotCorrupt(path + ": payload length " + std::to_string(buf.size() - kSnapshotHeaderSize) +
                              " bytes, expected " + std::to_string(count * sizeof(double)));
    if (detail::crc_of(buf.data() + kSnapshotHeaderSize, count * sizeof(double)) != detail::get<std::uint32_t>(buf, 36))
        throw SnapshotCorrupt(path + ": checksum mismatch");

    Field2D f(Grid2D{half_width, static_cast<int>(n)});
    std::memcpy(f.values().data(), buf.data() + kSnapshotHeaderSize, count * sizeof(double));
    if (meta) {
        meta->time = detail::get<double>(buf, 24);
        const auto s = detail::get<std::uint32_t>(buf, 32);
        if (s > 1) throw SnapshotCorrupt(path + ": unknown scheme tag");
        meta->scheme = static_cast<Scheme>(s);
    }
    return f;
}

}  // namespace nldiff
