#include "grif/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <set>
#include <stdexcept>

namespace grif {

namespace {

constexpr char kMagic[8] = {'G', 'R', 'I', 'F', 'C', 'K', 'P', 'T'};

void put_u16(std::string& out, uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}
void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct Reader {
    const std::string& buf;
    size_t pos = 0;
    explicit Reader(const std::string& b) : buf(b) {}

    void need(size_t n, const char* what) const {
        if (pos + n > buf.size())
            throw std::runtime_error(std::string("checkpoint: truncated ") + what + " at offset " + std::to_string(pos));
    }
    uint8_t u8(const char* what) {
        need(1, what);
        return static_cast<uint8_t>(buf[pos++]);
    }
    uint16_t u16(const char* what) {
        need(2, what);
        uint16_t v = static_cast<uint8_t>(buf[pos]) | (static_cast<uint16_t>(static_cast<uint8_t>(buf[pos + 1])) << 8);
        pos += 2;
        return v;
    }
    uint32_t u32(const char* what) {
        need(4, what);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<uint8_t>(buf[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }
    std::string bytes(size_t n, const char* what) {
        need(n, what);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

}  // namespace

void save_checkpoint(const NamedTensors& params, const std::string& path) {
    std::set<std::string> seen;
    std::string out;
    out.append(kMagic, sizeof(kMagic));
    put_u32(out, kCheckpointVersion);
    put_u32(out, static_cast<uint32_t>(params.size()));
    for (const auto& [name, t] : params) {
        if (!seen.insert(name).second) throw std::runtime_error("checkpoint: duplicate tensor name '" + name + "'");
        if (name.size() > 0xffff) throw std::runtime_error("checkpoint: name too long");
        if (t.rank() > 255) throw std::runtime_error("checkpoint: rank too large");
        for (float v : t.data())
            if (!std::isfinite(v)) throw std::runtime_error("checkpoint: non-finite value in tensor '" + name + "'");
        put_u16(out, static_cast<uint16_t>(name.size()));
        out.append(name);
        out.push_back(static_cast<char>(t.rank()));
        for (int d : t.shape()) put_u32(out, static_cast<uint32_t>(d));
        out.push_back(0);  // dtype 0 = real32
        for (float v : t.data()) put_u32(out, std::bit_cast<uint32_t>(v));
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("checkpoint: cannot open '" + path + "' for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw std::runtime_error("checkpoint: write failed for '" + path + "'");
}

NamedTensors load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    Reader r(buf);
    const std::string magic = r.bytes(sizeof(kMagic), "magic");
    if (std::memcmp(magic.data(), kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("checkpoint: bad magic in '" + path + "'");
    const uint32_t version = r.u32("version");
    if (version != kCheckpointVersion)
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    const uint32_t count = r.u32("entry count");

    NamedTensors params;
    params.reserve(count);
    std::set<std::string> seen;
    for (uint32_t e = 0; e < count; ++e) {
        const uint16_t name_len = r.u16("name length");
        const std::string name = r.bytes(name_len, "name");
        if (!seen.insert(name).second) throw std::runtime_error("checkpoint: duplicate tensor name '" + name + "'");
        const uint8_t ndim = r.u8("ndim");
        std::vector<int> shape(ndim);
        uint64_t numel = 1;
        for (uint8_t i = 0; i < ndim; ++i) {
            const uint32_t d = r.u32("dim");
            if (d == 0) throw std::runtime_error("checkpoint: zero dimension in tensor '" + name + "'");
            shape[i] = static_cast<int>(d);
            numel *= d;
        }
        const uint8_t dtype = r.u8("dtype");
        if (dtype != 0) throw std::runtime_error("checkpoint: unsupported dtype " + std::to_string(dtype));
        r.need(numel * 4, "payload");
        std::vector<float> values(numel);
        for (uint64_t i = 0; i < numel; ++i) {
            uint32_t bits = r.u32("payload");
            values[i] = std::bit_cast<float>(bits);
        }
        params.emplace_back(name, tc::Tensor(std::move(shape), std::move(values)));
    }
    if (r.pos != buf.size()) throw std::runtime_error("checkpoint: trailing bytes in '" + path + "'");
    return params;
}

const tc::Tensor& find_tensor(const NamedTensors& params, const std::string& name) {
    for (const auto& [n, t] : params)
        if (n == name) return t;
    throw std::runtime_error("checkpoint: missing tensor '" + name + "'");
}

bool has_tensor(const NamedTensors& params, const std::string& name) {
    for (const auto& [n, t] : params)
        if (n == name) return true;
    return false;
}

uint64_t params_hash(const NamedTensors& params) {
    uint64_t h = 0xCBF2'9CE4'8422'2325ULL;
    auto mix = [&h](uint8_t byte) {
        h ^= byte;
        h *= 0x100'0000'01B3ULL;
    };
    for (const auto& [name, t] : params) {
        for (char c : name) mix(static_cast<uint8_t>(c));
        for (int d : t.shape())
            for (int i = 0; i < 4; ++i) mix(static_cast<uint8_t>((static_cast<uint32_t>(d) >> (8 * i)) & 0xff));
        for (float v : t.data()) {
            const uint32_t bits = std::bit_cast<uint32_t>(v);
            for (int i = 0; i < 4; ++i) mix(static_cast<uint8_t>((bits >> (8 * i)) & 0xff));
        }
    }
    return h;
}

}  // namespace grif
