#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace dmh {

// Counter-based uniform random stream. Draw i is a pure function of
// (seed, i), so a given seed yields the same sequence on every platform
// and the stream can be copied, replayed, or split without shared state.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed = 0, std::uint64_t counter = 0)
        : seed_(seed), counter_(counter) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t counter() const { return counter_; }

    std::uint64_t next_u64() { return at(counter_++); }

    // Uniform on the open interval (0, 1); never returns an endpoint.
    double uniform01() {
        const std::uint64_t bits = next_u64() >> 11;  // 53 bits
        return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Consumes exactly two draws.
    double normal(double mean = 0.0, double stddev = 1.0) {
        const double u1 = uniform01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * r * std::cos(2.0 * M_PI * u2);
    }

    // Standard Gumbel noise: -log(-log u), u in (0,1).
    double gumbel() { return -std::log(-std::log(uniform01())); }

    std::uint64_t next_index(std::uint64_t n) { return next_u64() % n; }

    // Independent child stream; children with distinct salts do not overlap.
    RngStream derive(std::uint64_t salt) const {
        return RngStream(mix(seed_ ^ mix(salt + 0x9E3779B97F4A7C15ULL)));
    }

    static std::uint64_t hash_string(std::string_view s) {
        std::uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a 64
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001B3ULL;
        }
        return h;
    }

private:
    std::uint64_t at(std::uint64_t i) const {
        return mix(seed_ + (i + 1) * 0x9E3779B97F4A7C15ULL);
    }

    // splitmix64 finalizer
    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::uint64_t seed_;
    std::uint64_t counter_;
};

}  // namespace dmh
