#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

namespace glimpse {

// CRC-32 (IEEE 802.3): reflected polynomial 0xEDB88320, initial value
// 0xFFFFFFFF, final XOR 0xFFFFFFFF.
class Crc32 {
 public:
  void update(const void* bytes, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < len; ++i) {
      state_ = table()[(state_ ^ p[i]) & 0xffu] ^ (state_ >> 8);
    }
  }

  std::uint32_t value() const { return state_ ^ 0xffffffffu; }

 private:
  static const std::array<std::uint32_t, 256>& table() {
    static const std::array<std::uint32_t, 256> t = [] {
      std::array<std::uint32_t, 256> out{};
      for (std::uint32_t n = 0; n < 256; ++n) {
        std::uint32_t c = n;
        for (int k = 0; k < 8; ++k) c = (c & 1u) ? 0xedb88320u ^ (c >> 1) : c >> 1;
        out[n] = c;
      }
      return out;
    }();
    return t;
  }

  std::uint32_t state_ = 0xffffffffu;
};

inline std::uint32_t crc32(const void* bytes, std::size_t len) {
  Crc32 c;
  c.update(bytes, len);
  return c.value();
}

}  // namespace glimpse
