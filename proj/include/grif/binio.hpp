#pragma once

#include <bit>
#include <cstdint>
#include <string>

namespace grif::bin {

// Little-endian append/read helpers shared by the checkpoint and dataset
// formats. Encoding is byte-explicit so files are identical across hosts.

inline void put_u8(std::string& out, uint8_t v) { out.push_back(static_cast<char>(v)); }
inline void put_u16(std::string& out, uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}
inline void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u64(std::string& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_i16(std::string& out, int16_t v) { put_u16(out, static_cast<uint16_t>(v)); }
inline void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<uint32_t>(v)); }

struct Reader {
    const std::string& buf;
    size_t pos = 0;
    std::string context;

    Reader(const std::string& b, std::string ctx) : buf(b), context(std::move(ctx)) {}

    void need(size_t n, const char* what) const;
    uint8_t u8(const char* what);
    uint16_t u16(const char* what);
    uint32_t u32(const char* what);
    uint64_t u64(const char* what);
    int16_t i16(const char* what) { return static_cast<int16_t>(u16(what)); }
    float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
    std::string bytes(size_t n, const char* what);
};

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& bytes);

}  // namespace grif::bin
