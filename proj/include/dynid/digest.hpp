#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "dynid/error.hpp"

namespace dynid {

inline constexpr std::size_t kDigestSize = 32;

/// Fixed-width 32-byte block: the value space for hash outputs and for all
/// XOR algebra in the scheme (N, CID, B, C, y, h(x), encoded timestamps).
struct Digest {
  std::array<std::uint8_t, kDigestSize> bytes{};

  constexpr auto operator<=>(const Digest&) const = default;
};

constexpr Digest operator^(const Digest& a, const Digest& b) {
  Digest r;
  for (std::size_t i = 0; i < kDigestSize; ++i) {
    r.bytes[i] = static_cast<std::uint8_t>(a.bytes[i] ^ b.bytes[i]);
  }
  return r;
}

constexpr Digest& operator^=(Digest& a, const Digest& b) {
  a = a ^ b;
  return a;
}

/// Seconds since the Unix epoch, UTC.
struct Timestamp {
  std::uint64_t seconds = 0;

  constexpr auto operator<=>(const Timestamp&) const = default;
};

/// T as a digest-width block: 24 zero bytes, then the seconds value as a
/// big-endian u64. Injective over the whole 64-bit domain.
constexpr Digest encode_timestamp(Timestamp t) {
  Digest d;
  for (int i = 0; i < 8; ++i) {
    d.bytes[24 + i] =
        static_cast<std::uint8_t>(t.seconds >> (8 * (7 - i)) & 0xFF);
  }
  return d;
}

inline constexpr std::size_t kMaxPasswordBytes = 1024;

/// Validates password length rules without copying. Passwords are their
/// UTF-8 bytes, unnormalized, no terminator.
inline void check_password(std::string_view pw) {
  if (pw.empty()) {
    throw PasswordError(PasswordError::Kind::Empty, "empty password");
  }
  if (pw.size() > kMaxPasswordBytes) {
    throw PasswordError(PasswordError::Kind::TooLong,
                        "password exceeds 1024 bytes");
  }
}

/// The canonical byte encoding of a password.
inline std::vector<std::uint8_t> encode_password(std::string_view pw) {
  check_password(pw);
  return {pw.begin(), pw.end()};
}

inline std::string to_hex(const Digest& d) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * kDigestSize);
  for (std::uint8_t b : d.bytes) {
    out.push_back(kHex[b >> 4]);
    out.push_back(kHex[b & 0x0F]);
  }
  return out;
}

namespace detail {

inline int hex_nibble(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace detail

inline Digest digest_from_hex(std::string_view hex) {
  if (hex.size() != 2 * kDigestSize) {
    throw Error("hex digest must be exactly 64 characters");
  }
  Digest d;
  for (std::size_t i = 0; i < kDigestSize; ++i) {
    const int hi = detail::hex_nibble(hex[2 * i]);
    const int lo = detail::hex_nibble(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) throw Error("invalid hex character in digest");
    d.bytes[i] = static_cast<std::uint8_t>(hi << 4 | lo);
  }
  return d;
}

}  // namespace dynid
