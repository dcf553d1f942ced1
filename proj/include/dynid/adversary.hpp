#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dynid/authority.hpp"
#include "dynid/card.hpp"
#include "dynid/clock.hpp"
#include "dynid/net.hpp"

namespace dynid {

/// One measured sub-experiment of an attack.
struct AttackScenario {
  std::string name;
  std::uint64_t trials = 0;
  std::uint64_t acceptances = 0;
  std::string expected;
  bool conforms = true;
};

/// Outcome of an adversary experiment. The headline counters come from the
/// primary scenario; every scenario is listed, and conforms only holds when
/// all of them matched their predictions. Reproducible from the seed.
struct AttackReport {
  std::string name;
  std::uint64_t seed = 0;
  std::uint64_t trials = 0;
  std::uint64_t acceptances = 0;
  std::string expectation;
  bool conforms = true;
  std::vector<AttackScenario> scenarios;
  std::vector<std::string> artifacts;  // files written, for storage audits

  double rate() const {
    return trials == 0 ? 0.0 : static_cast<double>(acceptances) /
                                   static_cast<double>(trials);
  }

  void set_primary(AttackScenario s) {
    trials = s.trials;
    acceptances = s.acceptances;
    conforms = conforms && s.conforms;
    scenarios.insert(scenarios.begin(), std::move(s));
  }

  void add(AttackScenario s) {
    conforms = conforms && s.conforms;
    scenarios.push_back(std::move(s));
  }

  std::string to_text() const {
    std::ostringstream out;
    out << "attack: " << name << "\n";
    out << "seed: " << seed << "\n";
    out << "trials: " << trials << "  acceptances: " << acceptances
        << "  rate: " << rate() << "\n";
    out << "expectation: " << expectation << "\n";
    for (const auto& s : scenarios) {
      out << "  scenario " << s.name << ": trials=" << s.trials
          << " acceptances=" << s.acceptances << " expected=\"" << s.expected
          << "\" " << (s.conforms ? "ok" : "MISMATCH") << "\n";
    }
    for (const auto& f : artifacts) {
      out << "  artifact: " << f << "\n";
    }
    out << "conforms: " << (conforms ? "yes" : "NO") << "\n";
    return out.str();
  }
};

namespace detail {

inline std::string random_password(std::mt19937_64& rng,
                                   std::size_t min_len = 6,
                                   std::size_t max_len = 24) {
  static constexpr char kAlphabet[] =
      "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789"
      "!#$%&*+-.:?@_~";
  const std::size_t len =
      min_len + static_cast<std::size_t>(rng() % (max_len - min_len + 1));
  std::string pw;
  pw.reserve(len);
  for (std::size_t i = 0; i < len; ++i) {
    pw.push_back(kAlphabet[rng() % (sizeof kAlphabet - 1)]);
  }
  return pw;
}

inline Digest random_digest(std::mt19937_64& rng) {
  Digest d;
  for (std::size_t i = 0; i < kDigestSize; i += 8) {
    const std::uint64_t v = rng();
    for (std::size_t j = 0; j < 8; ++j) {
      d.bytes[i + j] = static_cast<std::uint8_t>(v >> (8 * j));
    }
  }
  return d;
}

// A guess drawn uniformly from the hash's image: any block for SHA-256,
// one of the 256 repeated-byte blocks for TOY8.
inline Digest random_digest_in_image(std::mt19937_64& rng,
                                     HashAlgorithmId alg) {
  if (alg == HashAlgorithmId::Toy8) {
    Digest d;
    d.bytes.fill(static_cast<std::uint8_t>(rng() & 0xFF));
    return d;
  }
  return random_digest(rng);
}

inline AuthoritySecrets secrets_from_rng(HashAlgorithmId alg,
                                         std::mt19937_64& rng) {
  AuthoritySecrets s;
  s.alg = alg;
  const Digest x = random_digest(rng);
  s.x = x.bytes;
  s.y = random_digest(rng);
  return s;
}

// In-process authority with a scripted clock; experiments submit messages
// straight into verify.
struct LocalAuthority {
  AuthoritySecrets secrets;
  FreshnessPolicy policy;
  ManualClock clock;
  ReplayCache cache;

  LocalAuthority(HashAlgorithmId alg, FreshnessPolicy p, std::mt19937_64& rng)
      : secrets(secrets_from_rng(alg, rng)),
        policy(p),
        clock(Timestamp{1'750'000'000 + rng() % 10'000'000}) {}

  Verdict submit(const LoginMessage& m) {
    return verify(secrets, policy, m, clock.now(), &cache);
  }
};

// Where an experiment submits messages and reads the target's clock.
struct SubmitChannel {
  std::function<Verdict(const LoginMessage&)> submit;
  std::function<Timestamp()> now;
};

inline SubmitChannel channel_of(LocalAuthority& a) {
  return {[&a](const LoginMessage& m) { return a.submit(m); },
          [&a]() { return a.clock.now(); }};
}

inline SubmitChannel channel_of_server(const HostPort& addr) {
  return {[addr](const LoginMessage& m) {
            const auto response = roundtrip_raw(addr, encode_login_request(m));
            const Frame f = decode_frame(response);
            if (f.type != MessageType::LoginResponse) {
              throw ProtocolError("expected a login response frame");
            }
            const LoginStatus s = decode_login_response_payload(f.payload);
            if (s == LoginStatus::ServerError) {
              throw ProtocolError("server reported an internal error");
            }
            return verdict_from_status(s);
          },
          []() { return SystemClock::instance().now(); }};
}

// Shared body of the forgery experiment. The adversary holds an observed
// honest quadruple but not x; y is used only by the constructive
// demonstration that it is the sole gate.
inline AttackReport forge_core(const SubmitChannel& ch, HashAlgorithmId alg,
                               const LoginMessage& observed, const Digest& y,
                               std::uint64_t trials, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  AttackReport report;
  report.name = "forge-without-y";
  report.seed = seed;

  AttackScenario random_c;
  random_c.name = "random-c";
  random_c.trials = trials;
  for (std::uint64_t i = 0; i < trials; ++i) {
    LoginMessage forged;
    forged.cid = random_digest(rng);
    forged.n = (i % 2 == 0) ? observed.n : random_digest(rng);
    forged.c = random_digest_in_image(rng, alg);
    forged.t = ch.now();
    if (accepted(ch.submit(forged))) ++random_c.acceptances;
  }
  if (alg == HashAlgorithmId::Sha256) {
    random_c.expected = "0 acceptances (success probability 2^-256)";
    random_c.conforms = random_c.acceptances == 0;
    report.expectation =
        "random-C forgeries without y never verify under sha256";
  } else {
    const double p = 1.0 / 256.0;
    const double sigma =
        std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
    const double observed_rate =
        static_cast<double>(random_c.acceptances) /
        static_cast<double>(trials);
    std::ostringstream exp;
    exp << "acceptance rate within 3 sigma of 1/256 (" << p - 3 * sigma
        << " .. " << p + 3 * sigma << ")";
    random_c.expected = exp.str();
    random_c.conforms = std::abs(observed_rate - p) <= 3 * sigma;
    report.expectation =
        "random-C forgeries under toy8 succeed at close to 1/256";
  }
  report.set_primary(std::move(random_c));

  AttackScenario with_y;
  with_y.name = "constructed-with-y";
  with_y.trials = 16;
  with_y.expected = "all accepted: C is computable from (CID, N, T) plus y";
  for (std::uint64_t i = 0; i < with_y.trials; ++i) {
    LoginMessage forged;
    forged.cid = random_digest(rng);
    forged.n = random_digest(rng);
    forged.t = ch.now();
    const Digest ts = encode_timestamp(forged.t);
    const Digest hpw = forged.cid ^ hash(forged.n ^ y ^ ts, alg);
    const Digest b = hash(forged.cid ^ hpw, alg);
    forged.c = hash(ts ^ forged.n ^ b ^ y, alg);
    if (accepted(ch.submit(forged))) ++with_y.acceptances;
  }
  with_y.conforms = with_y.acceptances == with_y.trials;
  report.add(std::move(with_y));
  return report;
}

// Shared body of the stolen-card probe: login with passwords the victim
// never chose.
inline AttackReport wrong_password_core(const SubmitChannel& ch,
                                        const CardImage& card,
                                        const std::string& victim_pw,
                                        std::uint64_t trials,
                                        std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  AttackReport report;
  report.name = "wrong-password";
  report.seed = seed;
  report.expectation =
      "every wrong-password login on a valid card is accepted; the "
      "verification equations recover whatever h(PW) was keyed";

  AttackScenario probe;
  probe.name = "wrong-password-logins";
  probe.trials = trials;
  probe.expected = "all accepted";
  for (std::uint64_t i = 0; i < trials; ++i) {
    std::string pw = random_password(rng);
    while (pw == victim_pw) pw = random_password(rng);
    if (accepted(ch.submit(build_login(card, pw, ch.now())))) {
      ++probe.acceptances;
    }
  }
  probe.conforms = probe.acceptances == probe.trials;
  report.set_primary(std::move(probe));

  AttackScenario flipped;
  flipped.name = "y-flipped-card";
  flipped.trials = 32;
  flipped.expected = "0 accepted: a wrong y breaks the C check";
  for (std::uint64_t i = 0; i < flipped.trials; ++i) {
    CardImage bad = card;
    bad.y.bytes[rng() % kDigestSize] ^=
        static_cast<std::uint8_t>(1 + rng() % 255);
    if (accepted(ch.submit(build_login(bad, random_password(rng), ch.now())))) {
      ++flipped.acceptances;
    }
  }
  flipped.conforms = flipped.acceptances == 0;
  report.add(std::move(flipped));

  AttackScenario empty;
  empty.name = "empty-password";
  empty.trials = 1;
  empty.expected = "encoding error before any message is sent";
  try {
    ch.submit(build_login(card, "", ch.now()));
    empty.conforms = false;
  } catch (const PasswordError&) {
    empty.conforms = true;
  }
  report.add(std::move(empty));
  return report;
}

}  // namespace detail

/// Replays a recorded honest login against an in-process authority, at the
/// window edge, beyond it, and inside it with the cache off and on.
inline AttackReport replay_attack_local(HashAlgorithmId alg,
                                        std::uint32_t delta_t,
                                        std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  AttackReport report;
  report.name = "replay";
  report.seed = seed;
  report.expectation =
      "stale replays (T* - T >= delta_t) are rejected; in-window replays "
      "are accepted unless the replay cache extension is on";

  FreshnessPolicy policy;
  policy.delta_t = delta_t;

  {
    detail::LocalAuthority target(alg, policy, rng);
    const std::string pw = detail::random_password(rng);
    const CardImage card = register_user(target.secrets, pw);
    const LoginMessage recorded =
        build_login(card, pw, target.clock.now());
    const bool setup_ok = accepted(target.submit(recorded));

    AttackScenario stale;
    stale.name = "stale-replay";
    stale.trials = 3;
    stale.expected = "0 acceptances at or beyond the freshness window";
    target.clock.advance(delta_t);  // exactly T + delta_t
    Verdict v1 = target.submit(recorded);
    target.clock.advance(1);
    Verdict v2 = target.submit(recorded);
    target.clock.advance(9ull * delta_t);
    Verdict v3 = target.submit(recorded);
    for (Verdict v : {v1, v2, v3}) {
      if (accepted(v)) ++stale.acceptances;
    }
    stale.conforms = setup_ok && v1 == Verdict::Expired &&
                     v2 == Verdict::Expired && v3 == Verdict::Expired;
    report.set_primary(std::move(stale));
  }

  {
    detail::LocalAuthority target(alg, policy, rng);
    const std::string pw = detail::random_password(rng);
    const CardImage card = register_user(target.secrets, pw);
    const LoginMessage recorded = build_login(card, pw, target.clock.now());
    const bool setup_ok = accepted(target.submit(recorded));
    target.clock.advance(1);
    const Verdict replayed = target.submit(recorded);

    AttackScenario inside;
    inside.name = "in-window-replay-no-cache";
    inside.trials = 1;
    inside.acceptances = accepted(replayed) ? 1 : 0;
    inside.expected =
        "accepted: the freshness window alone does not block replays "
        "younger than delta_t";
    inside.conforms = setup_ok && replayed == Verdict::Accept;
    report.add(std::move(inside));
  }

  {
    FreshnessPolicy cached = policy;
    cached.replay_cache_enabled = true;
    detail::LocalAuthority target(alg, cached, rng);
    const std::string pw = detail::random_password(rng);
    const CardImage card = register_user(target.secrets, pw);
    const LoginMessage recorded = build_login(card, pw, target.clock.now());
    const bool setup_ok = accepted(target.submit(recorded));
    target.clock.advance(1);
    const Verdict replayed = target.submit(recorded);

    AttackScenario cached_replay;
    cached_replay.name = "in-window-replay-cache";
    cached_replay.trials = 1;
    cached_replay.acceptances = accepted(replayed) ? 1 : 0;
    cached_replay.expected = "rejected as replayed by the cache extension";
    cached_replay.conforms = setup_ok && replayed == Verdict::Replayed;
    report.add(std::move(cached_replay));
  }
  return report;
}

/// Replay probes against a live server. Staleness is produced by
/// backdating T (the server clock cannot be scripted remotely); the
/// in-window resend reports whichever of accept/replayed the server's
/// cache setting produces.
inline AttackReport replay_attack_remote(const HostPort& addr,
                                         std::string_view admin_token,
                                         std::uint32_t delta_t,
                                         std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  AttackReport report;
  report.name = "replay";
  report.seed = seed;
  report.expectation =
      "backdated logins at or beyond delta_t are rejected; an immediate "
      "byte-for-byte resend is accepted (no cache) or rejected as replayed "
      "(cache on)";

  const std::string pw = detail::random_password(rng);
  const CardImage card = client_register(addr, admin_token, pw);
  const auto ch = detail::channel_of_server(addr);

  AttackScenario stale;
  stale.name = "stale-replay";
  stale.trials = 2;
  stale.expected = "0 acceptances at or beyond the freshness window";
  const std::uint64_t now = ch.now().seconds;
  const Verdict v1 =
      ch.submit(build_login(card, pw, Timestamp{now - delta_t}));
  const Verdict v2 =
      ch.submit(build_login(card, pw, Timestamp{now - 3ull * delta_t}));
  stale.acceptances =
      (accepted(v1) ? 1u : 0u) + (accepted(v2) ? 1u : 0u);
  stale.conforms = v1 == Verdict::Expired && v2 == Verdict::Expired;
  report.set_primary(std::move(stale));

  AttackScenario inside;
  inside.name = "in-window-replay";
  inside.trials = 1;
  inside.expected = "accepted without a replay cache, replayed with one";
  const auto frame_bytes =
      encode_login_request(build_login(card, pw, ch.now()));
  const Frame first = decode_frame(roundtrip_raw(addr, frame_bytes));
  const Frame second = decode_frame(roundtrip_raw(addr, frame_bytes));
  const Verdict v_first =
      verdict_from_status(decode_login_response_payload(first.payload));
  const Verdict v_second =
      verdict_from_status(decode_login_response_payload(second.payload));
  inside.acceptances = accepted(v_second) ? 1 : 0;
  inside.conforms =
      v_first == Verdict::Accept &&
      (v_second == Verdict::Accept || v_second == Verdict::Replayed);
  report.add(std::move(inside));
  return report;
}

/// Forgery without y against an in-process authority.
inline AttackReport forge_without_y_local(HashAlgorithmId alg,
                                          std::uint64_t trials,
                                          std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  FreshnessPolicy policy;
  detail::LocalAuthority target(alg, policy, rng);
  const std::string pw = detail::random_password(rng);
  const CardImage card = register_user(target.secrets, pw);
  const LoginMessage observed = build_login(card, pw, target.clock.now());
  return detail::forge_core(detail::channel_of(target), alg, observed,
                            target.secrets.y, trials, seed);
}

/// Forgery without y against a live server; a victim card is issued over
/// the admin channel to obtain the observed sample (and its y for the
/// constructive demonstration).
inline AttackReport forge_without_y_remote(const HostPort& addr,
                                           std::string_view admin_token,
                                           HashAlgorithmId alg,
                                           std::uint64_t trials,
                                           std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::string pw = detail::random_password(rng);
  const CardImage card = client_register(addr, admin_token, pw);
  const auto ch = detail::channel_of_server(addr);
  const LoginMessage observed = build_login(card, pw, ch.now());
  return detail::forge_core(ch, alg, observed, card.y, trials, seed);
}

/// Stolen-card probe against an in-process authority.
inline AttackReport wrong_password_probe_local(HashAlgorithmId alg,
                                               std::uint64_t trials,
                                               std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  FreshnessPolicy policy;
  detail::LocalAuthority target(alg, policy, rng);
  const std::string victim_pw = detail::random_password(rng);
  const CardImage card = register_user(target.secrets, victim_pw);
  return detail::wrong_password_core(detail::channel_of(target), card,
                                     victim_pw, trials, seed);
}

/// Stolen-card probe against a live server, with a card issued over the
/// admin channel standing in for the stolen card.
inline AttackReport wrong_password_probe_remote(const HostPort& addr,
                                                std::string_view admin_token,
                                                std::uint64_t trials,
                                                std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::string victim_pw = detail::random_password(rng);
  const CardImage card = client_register(addr, admin_token, victim_pw);
  return detail::wrong_password_core(detail::channel_of_server(addr), card,
                                     victim_pw, trials, seed);
}

/// Registers users against a fresh authority rooted in a scratch directory
/// and censuses every file it persisted. The scheme keeps no verifier
/// table, so the footprint must be exactly the 70-byte secrets file.
inline AttackReport stolen_verifier_audit(HashAlgorithmId alg,
                                          std::uint64_t registrations,
                                          std::uint64_t seed) {
  namespace fs = std::filesystem;
  std::mt19937_64 rng(seed);
  AttackReport report;
  report.name = "stolen-verifier";
  report.seed = seed;
  report.expectation =
      "after the registrations the authority's persistent footprint is "
      "exactly the 70-byte secrets file; no per-user record exists to steal";

  std::string tmpl =
      (fs::temp_directory_path() / "dynid-audit-XXXXXX").string();
  if (::mkdtemp(tmpl.data()) == nullptr) {
    throw Error("cannot create audit scratch directory");
  }
  const fs::path dir(tmpl);
  const fs::path secrets_path = dir / "authority.dids";

  AttackScenario census;
  census.name = "storage-census";
  census.trials = registrations;
  census.expected = "exactly one 70-byte secrets file";
  try {
    const AuthoritySecrets secrets = init_secrets(alg);
    save_secrets(secrets, secrets_path);
    FreshnessPolicy policy;
    for (std::uint64_t i = 0; i < registrations; ++i) {
      const std::string pw = detail::random_password(rng);
      const CardImage card = register_user(secrets, pw);
      // Exercise the verify path too; serving must not write either.
      const Timestamp t{1'750'000'000 + i};
      verify(secrets, policy, build_login(card, pw, t), t);
    }
    std::uint64_t files = 0;
    bool only_secrets = true;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
      ++files;
      std::ostringstream line;
      line << entry.path().filename().string();
      if (entry.is_regular_file()) {
        line << " (" << fs::file_size(entry.path()) << " bytes)";
      }
      report.artifacts.push_back(line.str());
      if (!entry.is_regular_file() || entry.path() != secrets_path ||
          fs::file_size(entry.path()) != detail::kRecordSize) {
        only_secrets = false;
      }
    }
    census.conforms = files == 1 && only_secrets;
  } catch (...) {
    fs::remove_all(dir);
    throw;
  }
  fs::remove_all(dir);
  report.set_primary(std::move(census));

  AttackScenario insider;
  insider.name = "insider-view";
  insider.trials = 0;
  insider.expected =
      "verification handles only h(PW); the plaintext password appears "
      "solely in the secure-channel registration request";
  insider.conforms = true;
  report.add(std::move(insider));
  return report;
}

}  // namespace dynid
