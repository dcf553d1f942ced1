#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <random>
#include <sys/stat.h>

#include "dynid/authority.hpp"
#include "dynid/card.hpp"
#include "support/kat.hpp"

using namespace dynid;
namespace fs = std::filesystem;

namespace {

Digest rand_digest(std::mt19937_64& rng) {
  Digest d;
  for (auto& b : d.bytes) b = static_cast<std::uint8_t>(rng());
  return d;
}

CardImage rand_card(std::mt19937_64& rng) {
  return CardImage{HashAlgorithmId::Sha256, rand_digest(rng),
                   rand_digest(rng)};
}

struct TempDir {
  fs::path path;
  TempDir() {
    std::string tmpl = (fs::temp_directory_path() / "dynid-test-XXXXXX")
                           .string();
    REQUIRE(::mkdtemp(tmpl.data()) != nullptr);
    path = tmpl;
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("login derivation matches the frozen oracle tuples") {
  const auto tuples = kat::load_tuples(std::string(DYNID_TEST_DATA) +
                                       "/known_answers.txt");
  for (const auto& tu : tuples) {
    const LoginDerivation d = derive_login(tu.card(), tu.pw, Timestamp{tu.t});
    CHECK(d.hpw == tu.hpw);
    CHECK(d.cid == tu.cid);
    CHECK(d.b == tu.b);
    CHECK(d.c == tu.c);

    const LoginMessage m = build_login(tu.card(), tu.pw, Timestamp{tu.t});
    CHECK(m.cid == tu.cid);
    CHECK(m.n == tu.n);
    CHECK(m.c == tu.c);
    CHECK(m.t.seconds == tu.t);
  }
}

TEST_CASE("build_login satisfies the CID identity") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 100; ++i) {
    const CardImage card = rand_card(rng);
    const Timestamp t{rng() >> 24};
    const std::string pw = "pw-" + std::to_string(rng());
    const LoginMessage m = build_login(card, pw, t);
    const Digest hpw = hash_password(pw, card.alg);
    // xor(cid, h(PW)) must equal h(N xor y xor T) by construction.
    CHECK((m.cid ^ hpw) ==
          hash(card.n ^ card.y ^ encode_timestamp(t), card.alg));
    // Server-side recovery returns exactly h(PW).
    CHECK((m.cid ^ hash(m.n ^ card.y ^ encode_timestamp(m.t), card.alg)) ==
          hpw);
  }
}

TEST_CASE("the dynamic ID changes from one second to the next") {
  std::mt19937_64 rng(12);
  const CardImage card = rand_card(rng);
  const Timestamp t{1'000'000'000};
  const LoginMessage a = build_login(card, "alice", t);
  const LoginMessage b = build_login(card, "alice", Timestamp{t.seconds + 1});
  CHECK(a.cid != b.cid);
  CHECK(a.c != b.c);
}

TEST_CASE("build_login is a pure function of card, password and time") {
  std::mt19937_64 rng(13);
  const CardImage card = rand_card(rng);
  const CardImage twin = card;
  const Timestamp t{1'234'567'890};
  CHECK(build_login(card, "pw", t) == build_login(twin, "pw", t));
}

TEST_CASE("change_password with the same password is a no-op") {
  std::mt19937_64 rng(14);
  const CardImage card = rand_card(rng);
  CHECK(change_password(card, "secret", "secret") == card);
}

TEST_CASE("change_password is an involution") {
  std::mt19937_64 rng(15);
  const CardImage card = rand_card(rng);
  const CardImage swapped = change_password(card, "first", "second");
  CHECK(swapped.y == card.y);
  CHECK(change_password(swapped, "second", "first") == card);
}

TEST_CASE("change_password preserves the registration identity") {
  // With x known we can check N* = h(PW*) xor h(x) directly.
  std::mt19937_64 rng(16);
  for (int i = 0; i < 20; ++i) {
    AuthoritySecrets secrets;
    const Digest x = rand_digest(rng);
    secrets.x = x.bytes;
    secrets.y = rand_digest(rng);
    const CardImage card = register_user(secrets, "old-password");
    CHECK((card.n ^ hash_password("old-password", card.alg)) ==
          key_digest(secrets));
    const CardImage updated = change_password(card, "old-password",
                                              "new-password");
    CHECK((updated.n ^ hash_password("new-password", card.alg)) ==
          key_digest(secrets));
    // And the full chain still verifies.
    const Timestamp t{1'700'000'000};
    CHECK(verify(secrets, FreshnessPolicy{},
                 build_login(updated, "new-password", t), t) ==
          Verdict::Accept);
  }
}

TEST_CASE("change_password validates both passwords") {
  std::mt19937_64 rng(17);
  const CardImage card = rand_card(rng);
  CHECK_THROWS_AS(change_password(card, "", "new"), PasswordError);
  CHECK_THROWS_AS(change_password(card, "old", ""), PasswordError);
  CHECK_THROWS_AS(change_password(card, "old", std::string(1025, 'n')),
                  PasswordError);
}

TEST_CASE("card file round trip is bit exact") {
  TempDir dir;
  std::mt19937_64 rng(18);
  const CardImage card{HashAlgorithmId::Toy8, rand_digest(rng),
                       rand_digest(rng)};
  const fs::path path = dir.path / "user.didc";
  save_card(card, path);
  CHECK(fs::file_size(path) == 70);
  CHECK(load_card(path) == card);

  struct stat st {};
  REQUIRE(::stat(path.c_str(), &st) == 0);
  CHECK((st.st_mode & 0777) == 0600);

  // Saving twice replaces atomically and leaves a single file behind.
  save_card(card, path);
  std::size_t entries = 0;
  for (const auto& e : fs::directory_iterator(dir.path)) {
    (void)e;
    ++entries;
  }
  CHECK(entries == 1);
}

TEST_CASE("card file decode errors are typed") {
  TempDir dir;
  std::mt19937_64 rng(19);
  const CardImage card = rand_card(rng);
  const fs::path path = dir.path / "card.didc";
  save_card(card, path);

  auto raw = [&] {
    std::ifstream in(path, std::ios::binary);
    return std::vector<char>((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  }();
  REQUIRE(raw.size() == 70);

  auto write_variant = [&](std::vector<char> bytes) {
    const fs::path p = dir.path / "variant.didc";
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.close();
    return p;
  };

  auto expect_kind = [&](const fs::path& p, FileFormatError::Kind kind) {
    try {
      load_card(p);
      FAIL("expected FileFormatError");
    } catch (const FileFormatError& e) {
      CHECK(e.kind == kind);
    }
  };

  auto bad_magic = raw;
  bad_magic[0] = 'X';
  expect_kind(write_variant(bad_magic), FileFormatError::Kind::BadMagic);

  auto bad_version = raw;
  bad_version[4] = 0x02;
  expect_kind(write_variant(bad_version),
              FileFormatError::Kind::UnknownVersion);

  auto bad_alg = raw;
  bad_alg[5] = 0x09;
  expect_kind(write_variant(bad_alg), FileFormatError::Kind::UnknownAlgorithm);

  auto truncated = raw;
  truncated.resize(10);
  expect_kind(write_variant(truncated), FileFormatError::Kind::Truncated);

  auto trailing = raw;
  trailing.push_back(0x00);
  expect_kind(write_variant(trailing), FileFormatError::Kind::TrailingData);

  CHECK_THROWS_AS(load_card(dir.path / "missing.didc"), FileFormatError);
}
