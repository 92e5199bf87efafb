#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace prmt4td {

/// splitmix64 finalizer; used to derive independent stage seeds from one run seed.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Deterministic per-stage seed: same (seed, tag) always gives the same value.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) noexcept {
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    return mix_seed(seed ^ mix_seed(h));
}

/// Index in [0, bound) from raw engine output. Unlike
/// std::uniform_int_distribution the result is identical across standard
/// libraries, which keeps splits and samples portable.
inline std::uint64_t bounded_index(std::mt19937_64& rng, std::uint64_t bound) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t r = rng();
    while (r >= limit) r = rng();
    return r % bound;
}

/// Portable Fisher-Yates shuffle.
template <typename T>
void portable_shuffle(std::vector<T>& items, std::mt19937_64& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(bounded_index(rng, i));
        std::swap(items[i - 1], items[j]);
    }
}

/// Uniform double in [0, 1) from the top 53 bits.
inline double unit_uniform(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace prmt4td
