#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <string>
#include <string_view>
#include <unordered_set>

#include "dynid/card.hpp"
#include "dynid/detail/file_io.hpp"
#include "dynid/detail/sys_random.hpp"
#include "dynid/digest.hpp"
#include "dynid/hash.hpp"

namespace dynid {

/// The remote system's secrets: key x and the per-card secret y. Neither
/// ever travels on the common channel, and nothing is kept per user.
struct AuthoritySecrets {
  HashAlgorithmId alg = HashAlgorithmId::Sha256;
  std::array<std::uint8_t, 32> x{};
  Digest y;

  constexpr auto operator<=>(const AuthoritySecrets&) const = default;
};

/// h(x).
inline Digest key_digest(const AuthoritySecrets& s) {
  return hash(std::span<const std::uint8_t>(s.x), s.alg);
}

/// Freshness window for login messages. delta_t is the maximum accepted
/// age of T; max_future_skew bounds how far T may run ahead of the
/// server clock. The replay cache is an extension, off by default: the
/// bare scheme accepts replays younger than delta_t.
struct FreshnessPolicy {
  std::uint32_t delta_t = 60;
  std::uint32_t max_future_skew = 5;
  bool replay_cache_enabled = false;
};

inline void validate(const FreshnessPolicy& p) {
  if (p.delta_t < 1) throw ConfigError("delta_t must be >= 1");
}

/// Outcome of one verification. Values double as the wire status byte.
enum class Verdict : std::uint8_t {
  Accept = 0x00,
  Expired = 0x01,
  FutureDated = 0x02,
  BadAuthenticator = 0x03,
  Replayed = 0x04,
};

constexpr bool accepted(Verdict v) { return v == Verdict::Accept; }

constexpr const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Accept:
      return "accept";
    case Verdict::Expired:
      return "expired";
    case Verdict::FutureDated:
      return "future-dated";
    case Verdict::BadAuthenticator:
      return "bad-authenticator";
    case Verdict::Replayed:
      return "replayed";
  }
  return "?";
}

inline AuthoritySecrets init_secrets(
    HashAlgorithmId alg = HashAlgorithmId::Sha256) {
  AuthoritySecrets s;
  s.alg = alg;
  detail::fill_random(s.x);
  detail::fill_random(s.y.bytes);
  return s;
}

/// Registration: N = h(PW) xor h(x). The returned card is the only
/// artifact; the authority stores no verifier entry for the user.
inline CardImage register_user(const AuthoritySecrets& s,
                               std::string_view pw) {
  return CardImage{s.alg, hash_password(pw, s.alg) ^ key_digest(s), s.y};
}

/// Linearizable seen-set over (C, T) pairs; entries lapse once they are
/// delta_t old, where the freshness gate takes over.
class ReplayCache {
 public:
  /// Atomically records (c, t) and reports whether it was already present.
  bool check_and_record(const Digest& c, Timestamp t, Timestamp now,
                        std::uint32_t delta_t) {
    std::string key(reinterpret_cast<const char*>(c.bytes.data()),
                    kDigestSize);
    for (int i = 0; i < 8; ++i) {
      key.push_back(static_cast<char>(t.seconds >> (8 * (7 - i)) & 0xFF));
    }
    std::lock_guard<std::mutex> lock(mu_);
    prune(now, delta_t);
    return !seen_.insert(std::move(key)).second;
  }

  std::size_t size() const {
    std::lock_guard<std::mutex> lock(mu_);
    return seen_.size();
  }

 private:
  void prune(Timestamp now, std::uint32_t delta_t) {
    for (auto it = seen_.begin(); it != seen_.end();) {
      std::uint64_t t = 0;
      for (int i = 0; i < 8; ++i) {
        t = t << 8 | static_cast<std::uint8_t>((*it)[kDigestSize + i]);
      }
      const bool stale = now.seconds >= t && now.seconds - t >= delta_t;
      it = stale ? seen_.erase(it) : std::next(it);
    }
  }

  mutable std::mutex mu_;
  std::unordered_set<std::string> seen_;
};

/// Server-side verification:
///   gate:  reject when (T* - T) >= delta_t (equality rejects) or when T
///          runs ahead of T* by more than the skew
///   step 2: h(PW)' = CID xor h(N xor y xor T)
///   step 3: B' = h(CID xor h(PW)'); accept iff C = h(T xor N xor B' xor y)
/// All failures are verdicts; nothing here throws.
inline Verdict verify(const AuthoritySecrets& s, const FreshnessPolicy& p,
                      const LoginMessage& msg, Timestamp t_now,
                      ReplayCache* cache = nullptr) {
  if (msg.t.seconds > t_now.seconds &&
      msg.t.seconds - t_now.seconds > p.max_future_skew) {
    return Verdict::FutureDated;
  }
  if (t_now.seconds >= msg.t.seconds &&
      t_now.seconds - msg.t.seconds >= p.delta_t) {
    return Verdict::Expired;
  }
  if (p.replay_cache_enabled && cache != nullptr &&
      cache->check_and_record(msg.c, msg.t, t_now, p.delta_t)) {
    return Verdict::Replayed;
  }
  const Digest ts = encode_timestamp(msg.t);
  const Digest hpw = msg.cid ^ hash(msg.n ^ s.y ^ ts, s.alg);
  const Digest b = hash(msg.cid ^ hpw, s.alg);
  const Digest expected_c = hash(ts ^ msg.n ^ b ^ s.y, s.alg);
  return msg.c == expected_c ? Verdict::Accept : Verdict::BadAuthenticator;
}

// Secrets file, exactly 70 bytes:
//   "DIDS" | version 0x01 | alg | x (32) | y (32)
inline constexpr char kSecretsMagic[4] = {'D', 'I', 'D', 'S'};

inline void save_secrets(const AuthoritySecrets& s,
                         const std::filesystem::path& path) {
  Digest x_block;
  x_block.bytes = s.x;
  const auto bytes =
      detail::encode_record(kSecretsMagic, {s.alg, x_block, s.y});
  detail::write_file_atomic(path, bytes);
}

inline AuthoritySecrets load_secrets(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  const auto rec = detail::decode_record(kSecretsMagic, bytes);
  AuthoritySecrets s;
  s.alg = rec.alg;
  s.x = rec.first.bytes;
  s.y = rec.second;
  return s;
}

}  // namespace dynid
