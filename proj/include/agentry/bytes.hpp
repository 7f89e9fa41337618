#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace agentry {

using Bytes = std::vector<uint8_t>;

inline Bytes to_bytes(std::string_view s) {
    return Bytes(s.begin(), s.end());
}

inline std::string to_string(const Bytes& b) {
    return std::string(b.begin(), b.end());
}

std::string hex_encode(const uint8_t* data, size_t len);
std::string hex_encode(const Bytes& b);

// Returns false on odd length or non-hex characters.
bool hex_decode(std::string_view hex, Bytes& out);

}  // namespace agentry
