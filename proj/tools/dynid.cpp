// dynid: dynamic-ID smart-card authentication toolkit.
//
// Subcommands wrap the library: `server init` / `server run` drive the
// authority daemon, `card ...` drives the card side, and `attack ...`
// runs the adversary experiments.

#include <termios.h>
#include <unistd.h>

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "dynid/adversary.hpp"
#include "dynid/authority.hpp"
#include "dynid/card.hpp"
#include "dynid/clock.hpp"
#include "dynid/net.hpp"

using namespace dynid;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Exit codes: 0 success/accept, 3 login rejected, 64 usage, 66 file,
// 69 transport or peer refusal, 70 internal. Server commands use 1 for
// config errors and 2 for bind/secrets errors.
enum ExitCode {
  kOk = 0,
  kRejected = 3,
  kUsage = 64,
  kFile = 66,
  kTransport = 69,
  kInternal = 70,
  kServerConfig = 1,
  kServerResource = 2,
};

int g_signal_pipe[2] = {-1, -1};

void on_signal(int) {
  const char byte = 1;
  [[maybe_unused]] ssize_t n = ::write(g_signal_pipe[1], &byte, 1);
}

// Reads a password from the controlling terminal with echo off; from a
// pipe it just reads a line, so scripts can drive it.
std::string prompt_password(const std::string& label) {
  std::cerr << label << ": " << std::flush;
  std::string pw;
  if (::isatty(STDIN_FILENO)) {
    termios saved{};
    ::tcgetattr(STDIN_FILENO, &saved);
    termios noecho = saved;
    noecho.c_lflag &= ~static_cast<tcflag_t>(ECHO);
    ::tcsetattr(STDIN_FILENO, TCSAFLUSH, &noecho);
    std::getline(std::cin, pw);
    ::tcsetattr(STDIN_FILENO, TCSAFLUSH, &saved);
    std::cerr << "\n";
  } else {
    std::getline(std::cin, pw);
  }
  if (!pw.empty() && pw.back() == '\r') pw.pop_back();
  return pw;
}

HashAlgorithmId alg_from_name(const std::string& name) {
  if (name == "sha256") return HashAlgorithmId::Sha256;
  if (name == "toy8") return HashAlgorithmId::Toy8;
  throw ConfigError("unknown algorithm name: " + name);
}

const char* verdict_cli_text(Verdict v) {
  switch (v) {
    case Verdict::Accept:
      return "ACCEPT";
    case Verdict::Expired:
      return "REJECT expired";
    case Verdict::FutureDated:
      return "REJECT future-dated";
    case Verdict::BadAuthenticator:
      return "REJECT bad-authenticator";
    case Verdict::Replayed:
      return "REJECT replayed";
  }
  return "REJECT unknown";
}

json report_to_json(const AttackReport& r) {
  json scenarios = json::array();
  for (const auto& s : r.scenarios) {
    scenarios.push_back({{"name", s.name},
                         {"trials", s.trials},
                         {"acceptances", s.acceptances},
                         {"expected", s.expected},
                         {"conforms", s.conforms}});
  }
  json out = {{"name", r.name},
              {"trials", r.trials},
              {"acceptances", r.acceptances},
              {"rate", r.rate()},
              {"expectation", r.expectation},
              {"conforms", r.conforms},
              {"seed", r.seed},
              {"scenarios", scenarios}};
  if (!r.artifacts.empty()) out["artifacts"] = r.artifacts;
  return out;
}

struct ServerInitArgs {
  std::string secrets_path;
  std::string alg_name = "sha256";
  bool force = false;
};

int cmd_server_init(const ServerInitArgs& args) {
  if (args.secrets_path.empty()) {
    throw ConfigError("no secrets path: pass --secrets or set DYNID_SECRETS");
  }
  if (!args.force && fs::exists(args.secrets_path)) {
    throw ConfigError("refusing to overwrite " + args.secrets_path +
                      " (use --force)");
  }
  const AuthoritySecrets secrets = init_secrets(alg_from_name(args.alg_name));
  save_secrets(secrets, args.secrets_path);
  std::cout << "wrote " << args.secrets_path << " (alg " << to_string(secrets.alg)
            << ", 70 bytes, mode 0600)\n";
  return kOk;
}

struct ServerRunArgs {
  std::string bind = "127.0.0.1:4600";
  std::string secrets_path;
  std::uint32_t delta_t = 60;
  std::uint32_t skew = 5;
  bool replay_cache = false;
  std::string admin_token;
  bool allow_toy_hash = false;
};

int cmd_server_run(const ServerRunArgs& args) {
  if (args.secrets_path.empty()) {
    throw ConfigError("no secrets path: pass --secrets or set DYNID_SECRETS");
  }
  AuthoritySecrets secrets;
  try {
    secrets = load_secrets(args.secrets_path);
  } catch (const FileFormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kServerResource;
  }

  const HostPort bind = parse_host_port(args.bind);
  ServerConfig cfg;
  cfg.bind_host = bind.host;
  cfg.port = bind.port;
  cfg.policy.delta_t = args.delta_t;
  cfg.policy.max_future_skew = args.skew;
  cfg.policy.replay_cache_enabled = args.replay_cache;
  cfg.admin_token = args.admin_token;
  cfg.allow_toy_hash = args.allow_toy_hash;

  Server server(secrets, cfg, SystemClock::instance(), &std::cerr);
  try {
    server.start();
  } catch (const TransportError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kServerResource;
  }
  std::cerr << "listening on " << bind.host << ":" << server.port()
            << " (delta_t " << args.delta_t << "s, skew " << args.skew
            << "s, replay cache " << (args.replay_cache ? "on" : "off")
            << ", registration "
            << (cfg.admin_token.empty() ? "disabled" : "enabled") << ")\n";

  if (::pipe(g_signal_pipe) != 0) {
    server.stop();
    throw Error("cannot create signal pipe");
  }
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  char byte = 0;
  while (::read(g_signal_pipe[0], &byte, 1) < 0 && errno == EINTR) {
  }
  std::cerr << "shutting down\n";
  server.stop();
  return kOk;
}

struct CardRegisterArgs {
  std::string server;
  std::string token;
  std::string out_path;
};

int cmd_card_register(const CardRegisterArgs& args) {
  const HostPort addr = parse_host_port(args.server);
  const std::string pw = prompt_password("Password");
  check_password(pw);
  const CardImage card = client_register(addr, args.token, pw);
  save_card(card, args.out_path);
  std::cout << "card written to " << args.out_path << " (alg "
            << to_string(card.alg) << ")\n";
  return kOk;
}

struct CardLoginArgs {
  std::string server;
  std::string card_path;
  bool as_json = false;
  std::optional<std::uint64_t> at_time;  // testing aid: fixes T
};

int cmd_card_login(const CardLoginArgs& args) {
  const HostPort addr = parse_host_port(args.server);
  const CardImage card = load_card(args.card_path);
  const std::string pw = prompt_password("Password");
  check_password(pw);

  SystemClock real;
  ManualClock scripted{Timestamp{args.at_time.value_or(0)}};
  Clock& clock = args.at_time ? static_cast<Clock&>(scripted) : real;

  const Timestamp t = clock.now();
  ManualClock fixed{t};  // one T for both the message and the report
  const Verdict verdict = client_login(addr, card, pw, fixed);

  if (args.as_json) {
    std::cout << json{{"verdict", to_string(verdict)}, {"t", t.seconds}}.dump()
              << "\n";
  } else {
    std::cout << verdict_cli_text(verdict) << "\n";
  }
  return accepted(verdict) ? kOk : kRejected;
}

struct CardPathArgs {
  std::string card_path;
};

int cmd_card_change_password(const CardPathArgs& args) {
  const CardImage card = load_card(args.card_path);
  const std::string pw_old = prompt_password("Old password");
  const std::string pw_new = prompt_password("New password");
  check_password(pw_old);
  check_password(pw_new);
  std::cerr << "note: the card cannot verify the old password; a mistyped "
               "one leaves the card unusable until changed back\n";
  save_card(change_password(card, pw_old, pw_new), args.card_path);
  std::cout << "password changed; card rewritten\n";
  return kOk;
}

int cmd_card_show(const CardPathArgs& args) {
  const CardImage card = load_card(args.card_path);
  std::cerr << "warning: y is a system secret shared by every card; treat "
               "this output as sensitive\n";
  std::cout << "version: 1\n"
            << "alg: " << to_string(card.alg) << "\n"
            << "n: " << to_hex(card.n) << "\n"
            << "y: " << to_hex(card.y) << "\n";
  return kOk;
}

struct AttackArgs {
  std::string name;
  std::optional<std::uint64_t> trials;
  std::optional<std::uint64_t> seed;
  bool toy_hash = false;
  std::string server;
  std::string token;
  std::uint32_t delta_t = 60;
  bool as_json = false;
};

int cmd_attack(const AttackArgs& args) {
  const HashAlgorithmId alg =
      args.toy_hash ? HashAlgorithmId::Toy8 : HashAlgorithmId::Sha256;
  const std::uint64_t seed = args.seed.value_or(detail::random_u64());
  const bool remote = !args.server.empty();
  if (remote && args.token.empty() && args.name != "stolen-verifier") {
    throw ConfigError("--server mode needs --token to issue a victim card");
  }

  AttackReport report;
  if (args.name == "replay") {
    report = remote ? replay_attack_remote(parse_host_port(args.server),
                                           args.token, args.delta_t, seed)
                    : replay_attack_local(alg, args.delta_t, seed);
  } else if (args.name == "forge") {
    const std::uint64_t trials = args.trials.value_or(
        remote ? 200 : (alg == HashAlgorithmId::Toy8 ? 10000 : 100000));
    report = remote
                 ? forge_without_y_remote(parse_host_port(args.server),
                                          args.token, alg, trials, seed)
                 : forge_without_y_local(alg, trials, seed);
  } else if (args.name == "wrong-password") {
    const std::uint64_t trials = args.trials.value_or(100);
    report = remote ? wrong_password_probe_remote(
                          parse_host_port(args.server), args.token, trials,
                          seed)
                    : wrong_password_probe_local(alg, trials, seed);
  } else if (args.name == "stolen-verifier") {
    if (remote) {
      throw ConfigError(
          "stolen-verifier audits the local filesystem; --server does not "
          "apply");
    }
    report = stolen_verifier_audit(alg, args.trials.value_or(50), seed);
  } else {
    throw ConfigError("unknown attack: " + args.name);
  }

  if (args.as_json) {
    std::cout << report_to_json(report).dump(2) << "\n";
  } else {
    std::cout << report.to_text();
  }
  return report.conforms ? kOk : 1;
}

int map_exception(bool server_context) {
  try {
    throw;
  } catch (const PasswordError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return server_context ? kServerConfig : kUsage;
  } catch (const FileFormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return server_context ? kServerResource : kFile;
  } catch (const RegistrationDenied& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kTransport;
  } catch (const ProtocolError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kTransport;
  } catch (const TransportError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return server_context ? kServerResource : kTransport;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInternal;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dynamic-ID smart-card authentication toolkit"};
  app.require_subcommand(1);

  auto* server = app.add_subcommand("server", "authority daemon");
  server->require_subcommand(1);

  ServerInitArgs init_args;
  auto* init = server->add_subcommand("init", "create a fresh secrets file");
  init->add_option("--secrets", init_args.secrets_path, "secrets file path")
      ->envname("DYNID_SECRETS");
  init->add_option("--alg", init_args.alg_name, "hash algorithm")
      ->check(CLI::IsMember({"sha256", "toy8"}));
  init->add_flag("--force", init_args.force, "overwrite an existing file");

  ServerRunArgs run_args;
  auto* run = server->add_subcommand("run", "serve login and registration");
  run->add_option("--bind", run_args.bind, "HOST:PORT to listen on");
  run->add_option("--secrets", run_args.secrets_path, "secrets file path")
      ->envname("DYNID_SECRETS");
  run->add_option("--delta-t", run_args.delta_t,
                  "freshness window in seconds");
  run->add_option("--skew", run_args.skew, "future clock skew in seconds");
  run->add_flag("--replay-cache", run_args.replay_cache,
                "reject in-window replays (extension)");
  run->add_option("--admin-token", run_args.admin_token,
                  "token gating registration")
      ->envname("DYNID_ADMIN_TOKEN");
  run->add_flag("--allow-toy-hash", run_args.allow_toy_hash,
                "serve toy8 secrets (test setups only)");

  auto* card = app.add_subcommand("card", "card-side operations");
  card->require_subcommand(1);

  CardRegisterArgs reg_args;
  auto* reg = card->add_subcommand("register", "obtain and save a new card");
  reg->add_option("--server", reg_args.server, "authority HOST:PORT")
      ->required();
  reg->add_option("--token", reg_args.token, "admin token")->required();
  reg->add_option("--out", reg_args.out_path, "card file to write")
      ->required();

  CardLoginArgs login_args;
  std::uint64_t at_time_raw = 0;
  auto* login = card->add_subcommand("login", "authenticate to the server");
  login->add_option("--server", login_args.server, "authority HOST:PORT")
      ->required();
  login->add_option("--card", login_args.card_path, "card file")->required();
  login->add_flag("--json", login_args.as_json, "emit one JSON object");
  auto* at_time_opt = login->add_option(
      "--at-time", at_time_raw, "use this epoch-seconds T (testing aid)");

  CardPathArgs change_args;
  auto* change =
      card->add_subcommand("change-password", "rewrite the card's nonce");
  change->add_option("--card", change_args.card_path, "card file")->required();

  CardPathArgs show_args;
  auto* show = card->add_subcommand("show", "print the card fields");
  show->add_option("--card", show_args.card_path, "card file")->required();

  AttackArgs attack_args;
  std::uint64_t trials_raw = 0;
  std::uint64_t seed_raw = 0;
  auto* attack = app.add_subcommand("attack", "run an adversary experiment");
  attack
      ->add_option("name", attack_args.name,
                   "replay | forge | wrong-password | stolen-verifier")
      ->required()
      ->check(CLI::IsMember(
          {"replay", "forge", "wrong-password", "stolen-verifier"}));
  auto* trials_opt =
      attack->add_option("--trials", trials_raw, "trial count override");
  auto* seed_opt =
      attack->add_option("--seed", seed_raw, "seed for reproducible reports");
  attack->add_flag("--toy-hash", attack_args.toy_hash,
                   "measure against the toy8 hash");
  attack->add_option("--server", attack_args.server,
                     "run against a live server at HOST:PORT");
  attack->add_option("--token", attack_args.token,
                     "admin token for --server mode");
  attack->add_option("--delta-t", attack_args.delta_t,
                     "freshness window assumed by the replay attack");
  attack->add_flag("--json", attack_args.as_json, "emit one JSON object");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  if (at_time_opt->count() > 0) login_args.at_time = at_time_raw;
  if (trials_opt->count() > 0) attack_args.trials = trials_raw;
  if (seed_opt->count() > 0) attack_args.seed = seed_raw;

  const bool server_context = server->parsed();
  try {
    if (init->parsed()) return cmd_server_init(init_args);
    if (run->parsed()) return cmd_server_run(run_args);
    if (reg->parsed()) return cmd_card_register(reg_args);
    if (login->parsed()) return cmd_card_login(login_args);
    if (change->parsed()) return cmd_card_change_password(change_args);
    if (show->parsed()) return cmd_card_show(show_args);
    if (attack->parsed()) return cmd_attack(attack_args);
  } catch (...) {
    return map_exception(server_context);
  }
  return kUsage;
}
