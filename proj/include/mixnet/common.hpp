#ifndef MIXNET_COMMON_HPP
#define MIXNET_COMMON_HPP

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mixnet {

namespace fs = std::filesystem;

// printf-style formatting into std::string
template <typename... Args>
std::string strf(const char* fmt, Args&&... args) {
    int n = std::snprintf(nullptr, 0, fmt, args...);
    if (n < 0) throw std::runtime_error("strf: format error");
    std::string s(static_cast<size_t>(n), '\0');
    std::snprintf(s.data(), s.size() + 1, fmt, args...);
    return s;
}

inline std::string strf(const char* fmt) { return std::string(fmt); }

// Deterministic PRNG. All randomness in the toolkit flows through this type
// so that results do not depend on the standard library's distribution
// implementations. Core generator is xoshiro-style splitmix64 feeding a
// 64-bit state quartet; good enough statistically for data shuffling and
// weight init, and bit-stable across platforms.
class Rng {
  public:
    explicit Rng(uint64_t seed = 0) {
        // splitmix64 expansion of the seed into four words
        uint64_t x = seed;
        for (auto& w : s_) {
            x += 0x9e3779b97f4a7c15ULL;
            uint64_t z = x;
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
            w = z ^ (z >> 31);
        }
    }

    uint64_t next_u64() {
        // xoshiro256**
        const uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n); n > 0
    uint64_t uniform_int(uint64_t n) {
        // multiply-shift; bias is negligible for the small n used here
        return static_cast<uint64_t>(uniform() * static_cast<double>(n));
    }

    // standard normal via Box-Muller (deterministic, no cached spare)
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 1e-300) u1 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // independent child stream; mixing the parent state with the stream id
    Rng fork(uint64_t stream) {
        uint64_t h = s_[0] ^ (stream + 0x9e3779b97f4a7c15ULL + (s_[1] << 6) + (s_[2] >> 2));
        return Rng(h);
    }

  private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    uint64_t s_[4];
};

// FNV-1a 64-bit, used for cache keys
inline uint64_t fnv1a(const void* data, size_t len, uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline uint64_t fnv1a(const std::string& s, uint64_t h = 0xcbf29ce484222325ULL) {
    return fnv1a(s.data(), s.size(), h);
}

}  // namespace mixnet

#endif
