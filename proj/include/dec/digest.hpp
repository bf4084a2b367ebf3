#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>

namespace dec {

inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ull) {
    std::uint64_t h = seed;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

inline std::string digest_text(std::string_view text) {
    return hex64(fnv1a64(text));
}

/// Stable digest of a placeholder-binding map. Keys are visited in sorted
/// order (std::map), fields separated with control bytes so that no
/// key/value concatenation can collide with another map.
inline std::string digest_bindings(const std::map<std::string, std::string>& bindings) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& [key, value] : bindings) {
        h = fnv1a64(key, h);
        h = fnv1a64(std::string_view("\x1f", 1), h);
        h = fnv1a64(value, h);
        h = fnv1a64(std::string_view("\x1e", 1), h);
    }
    return hex64(h);
}

} // namespace dec
