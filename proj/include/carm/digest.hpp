#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace carm {

/// 64-bit FNV-1a. Stable across platforms and runs; not cryptographic.
constexpr std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes,
                                std::uint64_t h = 0xcbf29ce484222325ULL) noexcept {
    for (std::uint8_t b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t fnv1a64(std::string_view text) noexcept {
    return fnv1a64({reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

std::string hex64(std::uint64_t v);

}  // namespace carm
