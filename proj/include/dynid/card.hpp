#pragma once

#include <compare>
#include <filesystem>
#include <string_view>

#include "dynid/detail/file_io.hpp"
#include "dynid/digest.hpp"
#include "dynid/hash.hpp"

namespace dynid {

/// Contents of one issued smart card: the hash function id, the nonce
/// N = h(PW) xor h(x), and the system secret y. Registration writes it,
/// password changes rewrite N, logins only read it.
struct CardImage {
  HashAlgorithmId alg = HashAlgorithmId::Sha256;
  Digest n;
  Digest y;

  constexpr auto operator<=>(const CardImage&) const = default;
};

/// The login quadruple sent on the common channel.
struct LoginMessage {
  Digest cid;
  Digest n;
  Digest c;
  Timestamp t;

  constexpr auto operator<=>(const LoginMessage&) const = default;
};

/// Every value the card computes while building a login.
struct LoginDerivation {
  Digest hpw;
  Digest cid;
  Digest b;
  Digest c;
};

/// The card's login computation:
///   CID = h(PW) xor h(N xor y xor T)
///   B   = h(CID xor h(PW))
///   C   = h(T xor N xor B xor y)
inline LoginDerivation derive_login(const CardImage& card, std::string_view pw,
                                    Timestamp t) {
  LoginDerivation d;
  d.hpw = hash_password(pw, card.alg);
  const Digest ts = encode_timestamp(t);
  d.cid = d.hpw ^ hash(card.n ^ card.y ^ ts, card.alg);
  d.b = hash(d.cid ^ d.hpw, card.alg);
  d.c = hash(ts ^ card.n ^ d.b ^ card.y, card.alg);
  return d;
}

inline LoginMessage build_login(const CardImage& card, std::string_view pw,
                                Timestamp t) {
  const LoginDerivation d = derive_login(card, pw, t);
  return LoginMessage{d.cid, card.n, d.c, t};
}

/// N* = N xor h(PW) xor h(PW*); y is untouched. The card has no way to
/// check the old password: keying a wrong one silently breaks N relative
/// to h(x), and only the next login reveals it.
inline CardImage change_password(const CardImage& card, std::string_view pw_old,
                                 std::string_view pw_new) {
  CardImage out = card;
  out.n = card.n ^ hash_password(pw_old, card.alg) ^
          hash_password(pw_new, card.alg);
  return out;
}

// Card image file, exactly 70 bytes:
//   "DIDC" | version 0x01 | alg | N (32) | y (32)
inline constexpr char kCardMagic[4] = {'D', 'I', 'D', 'C'};

inline void save_card(const CardImage& card,
                      const std::filesystem::path& path) {
  const auto bytes =
      detail::encode_record(kCardMagic, {card.alg, card.n, card.y});
  detail::write_file_atomic(path, bytes);
}

inline CardImage load_card(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  const auto rec = detail::decode_record(kCardMagic, bytes);
  return CardImage{rec.alg, rec.first, rec.second};
}

}  // namespace dynid
