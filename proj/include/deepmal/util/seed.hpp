#pragma once

#include <cstdint>
#include <string_view>

namespace deepmal {

// splitmix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (char c : text) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    return h;
}

/// Derives an independent stream seed from a master seed and a stage label.
/// Stages never share a stream, so adding a new consumer leaves the others
/// untouched.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view label) {
    return mix64(master ^ mix64(fnv1a(label)));
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view label,
                                    std::uint64_t index) {
    return mix64(derive_seed(master, label) + mix64(index + 1));
}

}  // namespace deepmal
