#pragma once

#include <cstdint>
#include <span>
#include <string_view>

#include "dynid/digest.hpp"
#include "dynid/error.hpp"
#include "dynid/sha256.hpp"

namespace dynid {

/// Registered one-way hash functions. Sha256 is the production choice;
/// Toy8 collapses the digest to 8 bits of entropy so attack success rates
/// become measurable, and is refused by the daemon unless explicitly
/// allowed.
enum class HashAlgorithmId : std::uint8_t {
  Sha256 = 0x01,
  Toy8 = 0xFF,
};

constexpr bool known_algorithm(std::uint8_t id) {
  return id == 0x01 || id == 0xFF;
}

inline HashAlgorithmId algorithm_from_byte(std::uint8_t id) {
  if (!known_algorithm(id)) {
    throw UnknownAlgorithmError("unknown hash algorithm id");
  }
  return static_cast<HashAlgorithmId>(id);
}

constexpr const char* to_string(HashAlgorithmId alg) {
  switch (alg) {
    case HashAlgorithmId::Sha256:
      return "sha256";
    case HashAlgorithmId::Toy8:
      return "toy8";
  }
  return "?";
}

/// h(message). Toy8 fills the block with the first SHA-256 byte, keeping
/// the 32-byte width while shrinking the image to 256 values.
inline Digest hash(std::span<const std::uint8_t> message, HashAlgorithmId alg) {
  switch (alg) {
    case HashAlgorithmId::Sha256:
      return Digest{Sha256::digest(message)};
    case HashAlgorithmId::Toy8: {
      const auto full = Sha256::digest(message);
      Digest d;
      d.bytes.fill(full[0]);
      return d;
    }
  }
  throw UnknownAlgorithmError("unknown hash algorithm id");
}

/// h over a digest-width block, for the h(A xor B xor ...) forms.
inline Digest hash(const Digest& block, HashAlgorithmId alg) {
  return hash(std::span<const std::uint8_t>(block.bytes), alg);
}

/// h(PW) over the password's UTF-8 bytes; validates length rules first.
inline Digest hash_password(std::string_view pw, HashAlgorithmId alg) {
  check_password(pw);
  return hash(std::span<const std::uint8_t>(
                  reinterpret_cast<const std::uint8_t*>(pw.data()), pw.size()),
              alg);
}

}  // namespace dynid
