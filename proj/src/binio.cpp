#include "grif/binio.hpp"

#include <fstream>
#include <stdexcept>

namespace grif::bin {

void Reader::need(size_t n, const char* what) const {
    if (pos + n > buf.size())
        throw std::runtime_error(context + ": truncated " + what + " at offset " + std::to_string(pos));
}

uint8_t Reader::u8(const char* what) {
    need(1, what);
    return static_cast<uint8_t>(buf[pos++]);
}

uint16_t Reader::u16(const char* what) {
    need(2, what);
    const uint16_t v =
        static_cast<uint16_t>(static_cast<uint8_t>(buf[pos])) |
        static_cast<uint16_t>(static_cast<uint16_t>(static_cast<uint8_t>(buf[pos + 1])) << 8);
    pos += 2;
    return v;
}

uint32_t Reader::u32(const char* what) {
    need(4, what);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<uint8_t>(buf[pos + i])) << (8 * i);
    pos += 4;
    return v;
}

uint64_t Reader::u64(const char* what) {
    need(8, what);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<uint8_t>(buf[pos + i])) << (8 * i);
    pos += 8;
    return v;
}

std::string Reader::bytes(size_t n, const char* what) {
    need(n, what);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open '" + path + "'");
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("write failed for '" + path + "'");
}

}  // namespace grif::bin
