#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace biascert {

/// FNV-1a 64-bit content hash. Used for prefix-sample digests and for the
/// specification digest embedded in certificates (tamper detection, not
/// cryptographic integrity).
inline std::uint64_t fnv1a64(std::string_view text, std::uint64_t seed = 0xCBF29CE484222325ULL) {
  std::uint64_t h = seed;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

inline std::string to_hex(std::uint64_t value) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[value & 0xF];
    value >>= 4;
  }
  return out;
}

}  // namespace biascert
