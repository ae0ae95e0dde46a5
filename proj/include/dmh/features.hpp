#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dmh {

struct RegionFeatures {
    std::uint32_t n = 0;          // region count
    std::uint32_t d = 0;          // feature dim
    std::vector<double> values;   // n*d row-major
};

// Binary region-feature file, little-endian throughout:
//   magic "DMHF" | u32 version=1 | u32 n | u32 d | n*d float64 row-major
RegionFeatures load_region_features(const std::string& path);
void write_region_features(const std::string& path, const RegionFeatures& rf);

}  // namespace dmh
