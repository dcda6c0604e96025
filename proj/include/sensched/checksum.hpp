#pragma once

#include <cstdint>
#include <string_view>

namespace sensched {

/// FNV-1a, 64-bit.
inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xCBF29CE484222325ull) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

}  // namespace sensched
