#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace occball {

using Rng = std::mt19937_64;

/// 64-bit FNV-1a.
constexpr std::uint64_t fnv1a(std::string_view text, std::uint64_t hash = 0xcbf29ce484222325ULL) {
    for (const char ch : text) {
        hash ^= static_cast<unsigned char>(ch);
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed of the named substream `name`/`index` under `base`. Independent
/// experiments draw from disjoint substreams so they can run in any order.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::string_view name, std::uint64_t index = 0) {
    return splitmix64(splitmix64(base ^ fnv1a(name)) + index);
}

inline Rng make_rng(std::uint64_t base, std::string_view name, std::uint64_t index = 0) {
    return Rng(derive_seed(base, name, index));
}

}  // namespace occball
