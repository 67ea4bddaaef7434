#pragma once

#include <cstdint>

#include "npd/errors.hpp"

namespace npd {

using Token = uint32_t;

// Fixed special ids; payload symbols occupy [4, size).
struct Vocab {
  static constexpr Token kBos = 0;
  static constexpr Token kEos = 1;
  static constexpr Token kPad = 2;
  static constexpr Token kSep = 3;

  uint32_t size = 16;

  explicit Vocab(uint32_t n = 16) : size(n) {
    if (n < 8) throw NpdError(ErrorKind::Config, "vocab size must be >= 8");
  }

  uint32_t payload_size() const { return size - 4; }
  Token payload(uint32_t symbol) const { return 4 + symbol; }
  bool is_payload(Token t) const { return t >= 4 && t < size; }
  bool valid(Token t) const { return t < size; }
};

}  // namespace npd
