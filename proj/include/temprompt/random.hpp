#pragma once

// Seeded hashing and sampling helpers. Everything here is bit-stable across
// platforms and standard libraries (no std::*_distribution).

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace temprompt {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline constexpr std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value) noexcept {
    return splitmix64(seed ^ (value + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2)));
}

template <typename... Ts>
constexpr std::uint64_t hash_values(std::uint64_t seed, Ts... values) noexcept {
    std::uint64_t h = splitmix64(seed);
    ((h = hash_combine(h, static_cast<std::uint64_t>(values))), ...);
    return h;
}

/// FNV-1a over bytes.
inline constexpr std::uint64_t fnv1a(std::string_view bytes,
                                     std::uint64_t h = 0xcbf29ce484222325ULL) noexcept {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Derives an independent child seed for a named component from a root seed.
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view component) noexcept {
    return hash_combine(splitmix64(root), fnv1a(component));
}

/// Uniform double in [0, 1) from a 64-bit hash.
inline double unit_from_hash(std::uint64_t h) noexcept {
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

/// Approximately standard-normal value from a hash (Box-Muller on two derived uniforms).
inline double normal_from_hash(std::uint64_t h) noexcept {
    constexpr double two_pi = 6.283185307179586476925286766559;
    const double u1 = 1.0 - unit_from_hash(splitmix64(h));  // (0, 1]
    const double u2 = unit_from_hash(splitmix64(h ^ 0xa5a5a5a5a5a5a5a5ULL));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

/// Small deterministic PRNG wrapper; mt19937_64 output is fully specified by the standard.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform index in [0, n). Requires n > 0.
    std::size_t index(std::size_t n) {
        // Rejection sampling removes modulo bias.
        const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % n);
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return static_cast<std::size_t>(x % n);
    }

    template <typename T>
    void shuffle(std::vector<T> &items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::swap(items[i - 1], items[index(i)]);
        }
    }

  private:
    std::mt19937_64 engine_;
};

}  // namespace temprompt
