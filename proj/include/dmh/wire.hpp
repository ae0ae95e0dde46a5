#pragma once

#include <cstdint>
#include <cstring>

namespace dmh::wire {

// explicit little-endian byte codecs shared by the binary file formats

inline std::uint32_t read_u32(const unsigned char* p) {
    return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
           std::uint32_t(p[3]) << 24;
}

inline void write_u32(unsigned char* p, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) p[i] = static_cast<unsigned char>(v >> (8 * i));
}

inline std::uint64_t read_u64(const unsigned char* p) {
    std::uint64_t u = 0;
    for (int i = 7; i >= 0; --i) u = u << 8 | p[i];
    return u;
}

inline void write_u64(unsigned char* p, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) p[i] = static_cast<unsigned char>(v >> (8 * i));
}

inline double read_f64(const unsigned char* p) {
    const std::uint64_t u = read_u64(p);
    double d;
    std::memcpy(&d, &u, 8);
    return d;
}

inline void write_f64(unsigned char* p, double d) {
    std::uint64_t u;
    std::memcpy(&u, &d, 8);
    write_u64(p, u);
}

}  // namespace dmh::wire
