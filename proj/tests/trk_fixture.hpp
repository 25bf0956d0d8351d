#pragma once

// Test-fixture writer for the classic tractography binary layout: 1000-byte
// header (magic "TRACK", header-size field 1000), zero scalars/properties,
// then per track an int32 point count and n x 3 float32 coordinates.

#include "bundlecodec/curves.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace bundlecodec::testutil {

inline void write_trk(const std::string& path, const std::vector<curves::Streamline>& lines,
                      std::uint16_t n_scalars = 0, std::uint16_t n_properties = 0,
                      std::uint32_t count_field_override = 0xffffffffu) {
    std::vector<std::uint8_t> hdr(1000, 0);
    std::memcpy(hdr.data(), "TRACK", 6);
    hdr[36] = static_cast<std::uint8_t>(n_scalars & 0xff);
    hdr[37] = static_cast<std::uint8_t>(n_scalars >> 8);
    hdr[238] = static_cast<std::uint8_t>(n_properties & 0xff);
    hdr[239] = static_cast<std::uint8_t>(n_properties >> 8);
    const std::uint32_t n_count = count_field_override != 0xffffffffu
                                      ? count_field_override
                                      : static_cast<std::uint32_t>(lines.size());
    for (int i = 0; i < 4; ++i) {
        hdr[988 + i] = static_cast<std::uint8_t>(n_count >> (8 * i));
        hdr[992 + i] = static_cast<std::uint8_t>(2u >> (8 * i));    // version
        hdr[996 + i] = static_cast<std::uint8_t>(1000u >> (8 * i)); // hdr_size
    }

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("write_trk: cannot open " + path);
    f.write(reinterpret_cast<const char*>(hdr.data()), 1000);
    for (const curves::Streamline& s : lines) {
        const std::uint32_t n = static_cast<std::uint32_t>(s.points());
        std::uint8_t nb[4];
        for (int i = 0; i < 4; ++i) nb[i] = static_cast<std::uint8_t>(n >> (8 * i));
        f.write(reinterpret_cast<const char*>(nb), 4);
        for (const curves::Point& p : s.pts)
            for (int c = 0; c < 3; ++c) {
                const std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(p[c]));
                std::uint8_t fb[4];
                for (int i = 0; i < 4; ++i) fb[i] = static_cast<std::uint8_t>(bits >> (8 * i));
                f.write(reinterpret_cast<const char*>(fb), 4);
            }
    }
}

} // namespace bundlecodec::testutil
