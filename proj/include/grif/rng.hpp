#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace grif {

// Deterministic, splittable random stream. All derived quantities (uniform,
// normal, bounded ints, permutations) are computed from raw 64-bit draws so
// that sequences are identical across platforms and standard libraries.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {
        // Decorrelate nearby seeds before the first draw.
        next_u64();
        next_u64();
    }

    // Independent child stream addressed by index; child(i) of equal parents
    // is reproducible and children of distinct indices do not overlap in
    // practice (distinct splitmix64 trajectories).
    Rng child(uint64_t index) const {
        uint64_t s = state_;
        s = splitmix(s ^ 0xA02B'DBF7'BB3C'0A7ULL);
        s = splitmix(s + splitmix(index + 0x9E37'79B9'7F4A'7C15ULL));
        return Rng(s);
    }

    uint64_t next_u64() {
        state_ += 0x9E37'79B9'7F4A'7C15ULL;
        return mix(state_);
    }

    // Uniform in [0, 1) with 53 bits of precision.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller; the spare draw is cached.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    // Uniform integer in [0, n). Multiply-shift keeps the mapping exact and
    // platform-independent; the bias for n << 2^64 is negligible.
    uint64_t below(uint64_t n) {
        if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
        return static_cast<uint64_t>((static_cast<__uint128_t>(next_u64()) * n) >> 64);
    }

    // Fisher-Yates permutation of 0..n-1.
    std::vector<uint32_t> permutation(uint32_t n) {
        std::vector<uint32_t> p(n);
        for (uint32_t i = 0; i < n; ++i) p[i] = i;
        for (uint32_t i = n; i > 1; --i) {
            const uint64_t j = below(i);
            std::swap(p[i - 1], p[j]);
        }
        return p;
    }

private:
    static uint64_t mix(uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58'476D'1CE4'E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D0'49BB'1331'11EBULL;
        return z ^ (z >> 31);
    }
    static uint64_t splitmix(uint64_t z) {
        z += 0x9E37'79B9'7F4A'7C15ULL;
        return mix(z);
    }

    uint64_t state_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace grif
