// Walks one registration, login, verification and password change with
// fixed inputs, printing every intermediate value.

#include <cstdio>
#include <iostream>

#include "dynid/authority.hpp"
#include "dynid/card.hpp"

using namespace dynid;

int main() {
  AuthoritySecrets secrets;
  secrets.alg = HashAlgorithmId::Sha256;
  secrets.x.fill(0x00);
  secrets.y.bytes.fill(0x11);

  const std::string pw = "alice";
  const Timestamp t{1'000'000'000};

  std::cout << "x   = " << to_hex(Digest{secrets.x}) << "\n";
  std::cout << "y   = " << to_hex(secrets.y) << "\n";
  std::cout << "PW  = \"" << pw << "\", T = " << t.seconds << "\n\n";

  const CardImage card = register_user(secrets, pw);
  std::cout << "registration: N = h(PW) xor h(x)\n";
  std::cout << "  h(x)  = " << to_hex(key_digest(secrets)) << "\n";
  std::cout << "  h(PW) = " << to_hex(hash_password(pw, card.alg)) << "\n";
  std::cout << "  N     = " << to_hex(card.n) << "\n\n";

  const LoginDerivation d = derive_login(card, pw, t);
  std::cout << "login:\n";
  std::cout << "  CID = h(PW) xor h(N xor y xor T) = " << to_hex(d.cid)
            << "\n";
  std::cout << "  B   = h(CID xor h(PW))           = " << to_hex(d.b) << "\n";
  std::cout << "  C   = h(T xor N xor B xor y)     = " << to_hex(d.c)
            << "\n\n";

  const LoginMessage msg = build_login(card, pw, t);
  const Verdict v = verify(secrets, FreshnessPolicy{}, msg, t);
  std::cout << "verification at T* = T: " << to_string(v) << "\n";
  const Verdict stale =
      verify(secrets, FreshnessPolicy{}, msg, Timestamp{t.seconds + 60});
  std::cout << "verification at T* = T + 60: " << to_string(stale) << "\n\n";

  const CardImage changed = change_password(card, pw, "bob");
  std::cout << "password change to \"bob\": N* = " << to_hex(changed.n)
            << "\n";
  std::cout << "  N* xor h(PW*) == h(x): "
            << ((changed.n ^ hash_password("bob", card.alg)) ==
                        key_digest(secrets)
                    ? "yes"
                    : "no")
            << "\n";
  return 0;
}
