#include "dmh/features.hpp"

#include <cstring>
#include <fstream>

#include "dmh/error.hpp"
#include "dmh/wire.hpp"

namespace dmh {

namespace {

constexpr char kMagic[4] = {'D', 'M', 'H', 'F'};
constexpr std::uint32_t kVersion = 1;

void write_u32_le(std::ofstream& os, std::uint32_t v) {
    unsigned char b[4];
    wire::write_u32(b, v);
    os.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

RegionFeatures load_region_features(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open feature file " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw FormatError(path + ": bad magic at offset 0");
    if (bytes.size() < 12) throw FormatError(path + ": truncated header at offset 4");
    const std::uint32_t version = wire::read_u32(bytes.data() + 4);
    if (version != kVersion)
        throw FormatError(path + ": unsupported version " + std::to_string(version) +
                          " at offset 4");
    if (bytes.size() < 16) throw FormatError(path + ": truncated header at offset 8");
    RegionFeatures rf;
    rf.n = wire::read_u32(bytes.data() + 8);
    rf.d = wire::read_u32(bytes.data() + 12);
    const std::size_t need = std::size_t(rf.n) * rf.d * 8;
    if (bytes.size() - 16 < need)
        throw FormatError(path + ": truncated payload at offset 16: need " +
                          std::to_string(need) + " bytes, have " +
                          std::to_string(bytes.size() - 16));
    rf.values.resize(std::size_t(rf.n) * rf.d);
    for (std::size_t i = 0; i < rf.values.size(); ++i)
        rf.values[i] = wire::read_f64(bytes.data() + 16 + i * 8);
    return rf;
}

void write_region_features(const std::string& path, const RegionFeatures& rf) {
    if (rf.values.size() != std::size_t(rf.n) * rf.d)
        throw ContractError("write_region_features: value count does not match n*d");
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write feature file " + path);
    os.write(kMagic, 4);
    write_u32_le(os, kVersion);
    write_u32_le(os, rf.n);
    write_u32_le(os, rf.d);
    std::vector<unsigned char> buf(rf.values.size() * 8);
    for (std::size_t i = 0; i < rf.values.size(); ++i)
        wire::write_f64(buf.data() + i * 8, rf.values[i]);
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!os) throw IoError("write failed for " + path);
}

}  // namespace dmh
