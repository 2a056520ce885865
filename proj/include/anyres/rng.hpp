#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace anyres {

// xoshiro256++ seeded through splitmix64. Every consumer owns its own stream;
// sub-streams are derived from the master seed with derive_seed so that the
// noise drawn by one stage never shifts when another stage changes how much
// randomness it consumes. The derivation rule is part of the public contract
// (see README).
class Rng {
public:
    explicit Rng(uint64_t seed) {
        uint64_t x = seed;
        for (auto& si : s_) si = splitmix64(x);
    }

    static uint64_t splitmix64(uint64_t& x) {
        x += 0x9E3779B97F4A7C15ULL;
        uint64_t z = x;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    uint64_t next_u64() {
        uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // uniform in [0,1)
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // one uniform draw
    int64_t uniform_int(int64_t n) { return int64_t(uniform() * double(n)) % n; }

    // Box-Muller, cos branch only: exactly two uniform draws per normal so the
    // consumption pattern is fixed.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(1.0 - u1));
        return r * std::cos(2.0 * M_PI * u2);
    }

    template <class T>
    void fill_normal(T* dst, size_t n, double stddev = 1.0) {
        for (size_t i = 0; i < n; ++i) dst[i] = T(normal() * stddev);
    }

    template <class T>
    void fill_uniform(T* dst, size_t n, double lo, double hi) {
        for (size_t i = 0; i < n; ++i) dst[i] = T(uniform(lo, hi));
    }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    uint64_t s_[4];
};

// Fixed seed-splitting rule: child = mix(master + GOLDEN * (stream + 1)).
inline uint64_t derive_seed(uint64_t master, uint64_t stream) {
    uint64_t x = master + 0x9E3779B97F4A7C15ULL * (stream + 1);
    return Rng::splitmix64(x);
}

inline uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline uint64_t derive_seed(uint64_t master, std::string_view name) {
    return derive_seed(master, fnv1a64(name));
}

// Well-known stream ids (README "Randomness" section).
namespace streams {
constexpr uint64_t lr_noise = 1;
constexpr uint64_t guidance_noise = 2;
constexpr uint64_t hr_noise = 3;
constexpr uint64_t decode_noise = 4;
constexpr uint64_t data_order = 10;
constexpr uint64_t t_draw = 11;
constexpr uint64_t hr_corrupt = 12;
constexpr uint64_t guidance_corrupt = 13;
constexpr uint64_t cond_dropout = 14;
constexpr uint64_t init_base = 20;
constexpr uint64_t init_adapter = 21;
constexpr uint64_t init_codec = 22;
constexpr uint64_t dataset_gen = 30;
}  // namespace streams

}  // namespace anyres
