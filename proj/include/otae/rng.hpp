#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace otae {

using Rng = std::mt19937_64;

/// 64-bit FNV-1a over raw bytes. Used for stream names, split fingerprints and
/// file digests.
constexpr std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ull) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

/// Splits one root seed into independent named streams ("init", "shuffle",
/// "projections", "synth", "subsample", ...).
constexpr std::uint64_t derive_seed(std::uint64_t root, std::string_view stream) {
    return splitmix64(root ^ fnv1a64(stream));
}

inline Rng make_rng(std::uint64_t root, std::string_view stream) {
    return Rng(derive_seed(root, stream));
}

}  // namespace otae
