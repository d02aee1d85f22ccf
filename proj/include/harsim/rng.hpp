#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace harsim {

/// Derives an independent seed for a named consumer ("datagen", "init",
/// "batching", ...) so each stage can be rerun on its own.
inline std::uint64_t substream_seed(std::uint64_t seed, std::string_view name) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (unsigned char ch : name) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    std::uint64_t z = seed ^ h;  // splitmix64 finalizer
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::mt19937_64 substream(std::uint64_t seed, std::string_view name) {
    return std::mt19937_64(substream_seed(seed, name));
}

}  // namespace harsim
