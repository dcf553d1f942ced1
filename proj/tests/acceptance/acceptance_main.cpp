// Acceptance suite: runs every release criterion end to end and prints one
// pass/fail line per criterion. Exits nonzero if any criterion fails.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "dynid/adversary.hpp"
#include "dynid/authority.hpp"
#include "dynid/card.hpp"
#include "dynid/clock.hpp"
#include "dynid/net.hpp"
#include "dynid/wire.hpp"
#include "support/kat.hpp"

using namespace dynid;
namespace fs = std::filesystem;

namespace {

struct Ctx {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      detail = what;
    }
  }
};

Digest rand_digest(std::mt19937_64& rng) {
  Digest d;
  for (auto& b : d.bytes) b = static_cast<std::uint8_t>(rng());
  return d;
}

AuthoritySecrets rand_secrets(std::mt19937_64& rng,
                              HashAlgorithmId alg = HashAlgorithmId::Sha256) {
  AuthoritySecrets s;
  s.alg = alg;
  s.x = rand_digest(rng).bytes;
  s.y = rand_digest(rng);
  return s;
}

std::string rand_password(std::mt19937_64& rng) {
  static constexpr char kChars[] =
      "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_@!.";
  const std::size_t len = 1 + rng() % 48;
  std::string pw;
  for (std::size_t i = 0; i < len; ++i) {
    pw.push_back(kChars[rng() % (sizeof kChars - 1)]);
  }
  return pw;
}

const std::string kDataDir = DYNID_TEST_DATA;

// 1. Known-answer conformance against the independent oracle, bit-exact.
void criterion_known_answers(Ctx& ctx) {
  const auto t_start = std::chrono::steady_clock::now();
  const auto tuples = kat::load_tuples(kDataDir + "/known_answers.txt");
  std::size_t sha_tuples = 0;
  for (const auto& tu : tuples) {
    if (tu.alg == HashAlgorithmId::Sha256) ++sha_tuples;
    const CardImage card = register_user(tu.secrets(), tu.pw);
    ctx.require(card.n == tu.n, "registration nonce mismatch");
    const LoginDerivation d = derive_login(card, tu.pw, Timestamp{tu.t});
    ctx.require(d.hpw == tu.hpw, "h(PW) mismatch");
    ctx.require(d.cid == tu.cid, "CID mismatch");
    ctx.require(d.b == tu.b, "B mismatch");
    ctx.require(d.c == tu.c, "C mismatch");
  }
  ctx.require(sha_tuples >= 10, "need at least 10 sha256 tuples");
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                    t_start)
          .count();
  ctx.require(secs < 1.0, "ran over the 1 s budget");
}

// 2. 1000 randomized register -> build_login -> verify round trips.
void criterion_completeness(Ctx& ctx) {
  const auto t_start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(0x5eed0002);
  FreshnessPolicy policy;
  policy.delta_t = 60;
  AuthoritySecrets secrets = rand_secrets(rng);
  for (int i = 0; i < 1000; ++i) {
    if (i % 100 == 0) secrets = rand_secrets(rng);
    const std::string pw = rand_password(rng);
    const Timestamp t{1'000'000 + (rng() % (1ull << 40))};
    const CardImage card = register_user(secrets, pw);
    const Verdict v = verify(secrets, policy, build_login(card, pw, t), t);
    ctx.require(v == Verdict::Accept, "honest round trip rejected");
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                    t_start)
          .count();
  ctx.require(secs < 5.0, "ran over the 5 s budget");
}

// 3. Freshness boundary: rejection exactly at delta_t, future skew bound.
void criterion_freshness_boundary(Ctx& ctx) {
  std::mt19937_64 rng(0x5eed0003);
  const AuthoritySecrets secrets = rand_secrets(rng);
  const CardImage card = register_user(secrets, "pw");
  FreshnessPolicy policy;
  policy.delta_t = 60;
  policy.max_future_skew = 5;
  const Timestamp t{2'000'000'000};
  const LoginMessage msg = build_login(card, "pw", t);

  ctx.require(verify(secrets, policy, msg, Timestamp{t.seconds + 59}) ==
                  Verdict::Accept,
              "delta_t - 1 must accept");
  ctx.require(verify(secrets, policy, msg, Timestamp{t.seconds + 60}) ==
                  Verdict::Expired,
              "exact delta_t must reject");
  ctx.require(verify(secrets, policy, msg, Timestamp{t.seconds + 61}) ==
                  Verdict::Expired,
              "past delta_t must reject");
  ctx.require(verify(secrets, policy, msg, Timestamp{t.seconds - 5}) ==
                  Verdict::Accept,
              "within future skew must accept");
  ctx.require(verify(secrets, policy, msg, Timestamp{t.seconds - 6}) ==
                  Verdict::FutureDated,
              "beyond future skew must reject");
}

// 4. Tamper detection: byte corruption of N, C, or in-window T never accepts.
void criterion_tamper_detection(Ctx& ctx) {
  std::mt19937_64 rng(0x5eed0004);
  const AuthoritySecrets secrets = rand_secrets(rng);
  const CardImage card = register_user(secrets, "pw");
  FreshnessPolicy policy;
  policy.delta_t = 60;

  int accepts_n = 0, accepts_c = 0, accepts_t = 0;
  for (int i = 0; i < 1000; ++i) {
    const Timestamp t{1'700'000'000 + (rng() % 1'000'000)};
    const LoginMessage honest = build_login(card, "pw", t);

    LoginMessage tn = honest;
    tn.n.bytes[rng() % 32] ^= static_cast<std::uint8_t>(1 + rng() % 255);
    if (verify(secrets, policy, tn, t) == Verdict::Accept) ++accepts_n;

    LoginMessage tc = honest;
    tc.c.bytes[rng() % 32] ^= static_cast<std::uint8_t>(1 + rng() % 255);
    if (verify(secrets, policy, tc, t) == Verdict::Accept) ++accepts_c;

    // Corrupt T's low byte but keep it inside the freshness window.
    LoginMessage tt = honest;
    tt.t.seconds ^= 1 + rng() % 31;
    const Timestamp t_now{std::max(t.seconds, tt.t.seconds)};
    const Verdict v = verify(secrets, policy, tt, t_now);
    if (v == Verdict::Accept) ++accepts_t;
  }
  ctx.require(accepts_n == 0, "corrupted N was accepted");
  ctx.require(accepts_c == 0, "corrupted C was accepted");
  ctx.require(accepts_t == 0, "corrupted T was accepted");
}

// 5. Algebraic consequences of the verification equations.
void criterion_algebraic_properties(Ctx& ctx) {
  std::mt19937_64 rng(0x5eed0005);
  const AuthoritySecrets secrets = rand_secrets(rng);
  const CardImage card = register_user(secrets, "the-real-password");
  const Timestamp t{1'700'000'000};

  int wrong_pw_accepts = 0;
  for (int i = 0; i < 100; ++i) {
    const std::string wrong = "wrong-" + std::to_string(rng());
    if (verify(secrets, FreshnessPolicy{}, build_login(card, wrong, t), t) ==
        Verdict::Accept) {
      ++wrong_pw_accepts;
    }
  }
  ctx.require(wrong_pw_accepts == 100,
              "password-independence did not hold 100/100");

  const LoginMessage honest = build_login(card, "the-real-password", t);
  int cid_unchanged = 0;
  for (int i = 0; i < 100; ++i) {
    LoginMessage m = honest;
    m.cid = rand_digest(rng);
    if (verify(secrets, FreshnessPolicy{}, m, t) == Verdict::Accept) {
      ++cid_unchanged;
    }
  }
  ctx.require(cid_unchanged == 100,
              "CID-independence did not hold 100/100");

  LoginMessage bad = honest;
  bad.c.bytes[5] ^= 0x10;
  for (int i = 0; i < 16; ++i) {
    LoginMessage m = bad;
    m.cid = rand_digest(rng);
    ctx.require(verify(secrets, FreshnessPolicy{}, m, t) ==
                    Verdict::BadAuthenticator,
                "CID substitution changed a rejection");
  }
}

// 6. Forgery statistics under both hash algorithms.
void criterion_forgery_statistics(Ctx& ctx) {
  const AttackReport sha =
      forge_without_y_local(HashAlgorithmId::Sha256, 100000, 0x5eed0006);
  ctx.require(sha.trials == 100000, "sha256 forgery trial count");
  ctx.require(sha.acceptances == 0, "random-C forgery verified under sha256");
  ctx.require(sha.conforms, "sha256 forgery report nonconforming");

  const AttackReport toy =
      forge_without_y_local(HashAlgorithmId::Toy8, 10000, 0x5eed0007);
  const double p = 1.0 / 256.0;
  const double sigma = std::sqrt(p * (1 - p) / 10000.0);
  ctx.require(std::abs(toy.rate() - p) <= 3 * sigma,
              "toy8 forgery rate outside 3 sigma of 1/256");
  ctx.require(toy.conforms, "toy8 forgery report nonconforming");
}

// 7. Password change: new password verifies, identity holds, same-password
// change is a byte-exact no-op.
void criterion_password_change(Ctx& ctx) {
  std::mt19937_64 rng(0x5eed0008);
  FreshnessPolicy policy;
  for (int i = 0; i < 50; ++i) {
    const AuthoritySecrets secrets = rand_secrets(rng);
    const std::string pw_old = rand_password(rng);
    std::string pw_new = rand_password(rng);
    while (pw_new == pw_old) pw_new = rand_password(rng);

    const CardImage card = register_user(secrets, pw_old);
    const CardImage updated = change_password(card, pw_old, pw_new);
    ctx.require((updated.n ^ hash_password(pw_new, updated.alg)) ==
                    key_digest(secrets),
                "N* xor h(PW*) != h(x) after change");
    const Timestamp t{1'700'000'000ull + static_cast<std::uint64_t>(i)};
    ctx.require(verify(secrets, policy, build_login(updated, pw_new, t), t) ==
                    Verdict::Accept,
                "login with the new password rejected");

    const CardImage same = change_password(card, pw_old, pw_old);
    ctx.require(same.n == card.n, "same-password change moved N");
    ctx.require(same == card, "same-password change altered the card");
  }
}

// 8. Wire conformance: bit-exact round trips, shipped frames, fuzz safety.
void criterion_wire_conformance(Ctx& ctx) {
  std::mt19937_64 rng(0x5eed0009);
  for (int i = 0; i < 500; ++i) {
    const LoginMessage m{rand_digest(rng), rand_digest(rng), rand_digest(rng),
                         Timestamp{rng()}};
    const auto bytes = encode_login_request(m);
    const Frame f = decode_frame(bytes);
    ctx.require(f.type == MessageType::LoginRequest &&
                    decode_login_request_payload(f.payload) == m &&
                    encode_login_request(m) == bytes,
                "login request round trip not bit-exact");
  }
  for (std::uint8_t s : {0x00, 0x01, 0x02, 0x03, 0x04, 0x7F}) {
    const auto status = static_cast<LoginStatus>(s);
    const auto bytes = encode_login_response(status);
    ctx.require(decode_login_response_payload(decode_frame(bytes).payload) ==
                    status,
                "login response round trip");
  }
  for (int i = 0; i < 200; ++i) {
    RegisterRequest req{"token-" + std::to_string(rng() % 4096),
                        "pw-" + std::to_string(rng())};
    const auto bytes = encode_register_request(req);
    ctx.require(decode_register_request_payload(decode_frame(bytes).payload) ==
                    req,
                "register request round trip");

    const CardImage card{i % 2 == 0 ? HashAlgorithmId::Sha256
                                    : HashAlgorithmId::Toy8,
                         rand_digest(rng), rand_digest(rng)};
    const auto resp = encode_register_response(card);
    const auto decoded =
        decode_register_response_payload(decode_frame(resp).payload);
    ctx.require(decoded.has_value() && *decoded == card,
                "register response round trip");
  }
  ctx.require(!decode_register_response_payload(
                   decode_frame(encode_register_response(std::nullopt))
                       .payload)
                   .has_value(),
              "rejected register response round trip");

  const auto tuples = kat::load_tuples(kDataDir + "/known_answers.txt");
  const auto named = kat::load_frames(kDataDir + "/wire_frames.hex");
  const auto& t0 = tuples.at(0);
  const LoginMessage kat_msg{t0.cid, t0.n, t0.c, Timestamp{t0.t}};
  ctx.require(encode_login_request(kat_msg) ==
                  kat::find_frame(named, "login_request_kat0").bytes,
              "shipped login frame mismatch");
  ctx.require(encode_register_request({"tok", "alice"}) ==
                  kat::find_frame(named, "register_request_tok_alice").bytes,
              "shipped register request mismatch");
  ctx.require(
      encode_register_response(CardImage{t0.alg, t0.n, t0.y}) ==
          kat::find_frame(named, "register_response_ok_kat0").bytes,
      "shipped register response mismatch");
  ctx.require(encode_login_response(LoginStatus::Replayed) ==
                  kat::find_frame(named, "login_response_replayed").bytes,
              "shipped login response mismatch");

  int unexpected = 0;
  for (int i = 0; i < 10000; ++i) {
    std::vector<std::uint8_t> buf(rng() % 200);
    for (auto& b : buf) b = static_cast<std::uint8_t>(rng());
    try {
      const Frame f = decode_frame(buf);
      switch (f.type) {
        case MessageType::LoginRequest:
          decode_login_request_payload(f.payload);
          break;
        case MessageType::LoginResponse:
          decode_login_response_payload(f.payload);
          break;
        case MessageType::RegisterRequest:
          decode_register_request_payload(f.payload);
          break;
        case MessageType::RegisterResponse:
          decode_register_response_payload(f.payload);
          break;
      }
    } catch (const DecodeError&) {
      // the only permitted failure mode
    } catch (...) {
      ++unexpected;
    }
  }
  ctx.require(unexpected == 0, "fuzzing produced a non-typed failure");
}

// 9. End-to-end daemon flow over loopback with a scripted clock.
void criterion_daemon_end_to_end(Ctx& ctx) {
  const AuthoritySecrets secrets = init_secrets();
  ManualClock clock{Timestamp{1'754'000'000}};

  ServerConfig cfg;
  cfg.admin_token = "acceptance-admin";
  Server server(secrets, cfg, clock);
  server.start();
  const HostPort addr{"127.0.0.1", server.port()};

  const fs::path card_path =
      fs::temp_directory_path() /
      ("dynid-acceptance-card-" + std::to_string(::getpid()) + ".didc");

  const CardImage issued =
      client_register(addr, "acceptance-admin", "first-password");
  save_card(issued, card_path);
  const CardImage card = load_card(card_path);
  ctx.require(card == issued, "card image round trip");

  ctx.require(client_login(addr, card, "first-password", clock) ==
                  Verdict::Accept,
              "initial login rejected");

  const CardImage changed =
      change_password(card, "first-password", "second-password");
  save_card(changed, card_path);
  ctx.require(client_login(addr, load_card(card_path), "second-password",
                           clock) == Verdict::Accept,
              "login after password change rejected");

  std::atomic<int> accepts{0};
  std::vector<std::thread> threads;
  for (int i = 0; i < 100; ++i) {
    threads.emplace_back([&] {
      try {
        if (client_login(addr, changed, "second-password", clock) ==
            Verdict::Accept) {
          ++accepts;
        }
      } catch (const std::exception&) {
      }
    });
  }
  for (auto& th : threads) th.join();
  ctx.require(accepts == 100, "concurrent logins did not all accept");

  const auto captured =
      encode_login_request(build_login(changed, "second-password",
                                       clock.now()));
  ctx.require(decode_login_response_payload(
                  decode_frame(roundtrip_raw(addr, captured)).payload) ==
                  LoginStatus::Accept,
              "captured frame did not accept when fresh");
  clock.advance(60);
  ctx.require(decode_login_response_payload(
                  decode_frame(roundtrip_raw(addr, captured)).payload) ==
                  LoginStatus::Expired,
              "replay after delta_t not expired");
  server.stop();

  ServerConfig cached_cfg;
  cached_cfg.admin_token = "acceptance-admin";
  cached_cfg.policy.replay_cache_enabled = true;
  Server cached(secrets, cached_cfg, clock);
  cached.start();
  const HostPort cached_addr{"127.0.0.1", cached.port()};
  const auto fresh =
      encode_login_request(build_login(changed, "second-password",
                                       clock.now()));
  ctx.require(decode_login_response_payload(
                  decode_frame(roundtrip_raw(cached_addr, fresh)).payload) ==
                  LoginStatus::Accept,
              "cache server rejected the first copy");
  ctx.require(decode_login_response_payload(
                  decode_frame(roundtrip_raw(cached_addr, fresh)).payload) ==
                  LoginStatus::Replayed,
              "immediate replay not flagged with the cache on");
  cached.stop();
  fs::remove(card_path);
}

// 10. No verifier table: the authority's footprint is one 70-byte file.
void criterion_no_verifier_table(Ctx& ctx) {
  const AttackReport r =
      stolen_verifier_audit(HashAlgorithmId::Sha256, 50, 0x5eed000a);
  ctx.require(r.conforms, "audit report nonconforming");
  ctx.require(r.artifacts.size() == 1, "authority wrote extra files");
  ctx.require(r.artifacts.at(0).find("70 bytes") != std::string::npos,
              "secrets file is not 70 bytes");
}

struct Criterion {
  const char* name;
  std::function<void(Ctx&)> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"known-answer conformance (oracle, bit-exact)",
       criterion_known_answers},
      {"completeness: 1000 randomized honest round trips",
       criterion_completeness},
      {"freshness boundary at delta_t and future skew",
       criterion_freshness_boundary},
      {"tamper detection on N, C and in-window T",
       criterion_tamper_detection},
      {"password- and CID-independence hold exactly",
       criterion_algebraic_properties},
      {"forgery statistics: 0/1e5 sha256, 1/256 band toy8",
       criterion_forgery_statistics},
      {"password change identities and no-op",
       criterion_password_change},
      {"wire conformance, shipped frames and fuzz safety",
       criterion_wire_conformance},
      {"daemon end-to-end over loopback with scripted clock",
       criterion_daemon_end_to_end},
      {"no verifier table: 70-byte footprint after 50 registrations",
       criterion_no_verifier_table},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Ctx ctx;
    const auto start = std::chrono::steady_clock::now();
    try {
      criteria[i].run(ctx);
    } catch (const std::exception& e) {
      ctx.ok = false;
      ctx.detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    std::printf("[%2zu] %s  %s (%.2fs)%s%s\n", i + 1,
                ctx.ok ? "PASS" : "FAIL", criteria[i].name, secs,
                ctx.ok ? "" : " -- ", ctx.ok ? "" : ctx.detail.c_str());
    if (!ctx.ok) ++failures;
  }
  if (failures > 0) {
    std::printf("%d criterion(s) failed\n", failures);
    return 1;
  }
  std::printf("all %zu criteria passed\n", criteria.size());
  return 0;
}
