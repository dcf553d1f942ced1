#pragma once

#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <charconv>
#include <condition_variable>
#include <cstring>
#include <ctime>
#include <iostream>
#include <list>
#include <mutex>
#include <ostream>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "dynid/authority.hpp"
#include "dynid/card.hpp"
#include "dynid/clock.hpp"
#include "dynid/error.hpp"
#include "dynid/wire.hpp"

namespace dynid {

namespace detail {

class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Socket& operator=(Socket&& o) noexcept {
    reset();
    fd_ = std::exchange(o.fd_, -1);
    return *this;
  }
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket() { reset(); }

  void reset() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

  int get() const { return fd_; }
  explicit operator bool() const { return fd_ >= 0; }

 private:
  int fd_ = -1;
};

inline void set_recv_timeout(int fd, int seconds) {
  timeval tv{};
  tv.tv_sec = seconds;
  ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
}

inline void send_all(int fd, std::span<const std::uint8_t> data) {
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t k =
        ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL);
    if (k < 0) {
      if (errno == EINTR) continue;
      throw TransportError(std::string("send: ") + std::strerror(errno));
    }
    off += static_cast<std::size_t>(k);
  }
}

// Reads exactly n bytes; false means clean EOF before the first byte.
inline bool recv_exact(int fd, std::uint8_t* buf, std::size_t n) {
  std::size_t off = 0;
  while (off < n) {
    const ssize_t k = ::recv(fd, buf + off, n - off, 0);
    if (k == 0) {
      if (off == 0) return false;
      throw TransportError("connection closed mid-frame");
    }
    if (k < 0) {
      if (errno == EINTR) continue;
      if (errno == EAGAIN || errno == EWOULDBLOCK) {
        throw TransportError("read timeout");
      }
      throw TransportError(std::string("recv: ") + std::strerror(errno));
    }
    off += static_cast<std::size_t>(k);
  }
  return true;
}

// Reads one length-prefixed frame, header included. Empty result = clean
// EOF on a frame boundary.
inline std::vector<std::uint8_t> recv_frame_bytes(int fd) {
  std::uint8_t head[4];
  if (!recv_exact(fd, head, 4)) return {};
  const std::uint32_t length = get_u32be(head);
  if (length < 1) {
    throw DecodeError(DecodeError::Kind::LengthMismatch,
                      "frame length below minimum");
  }
  if (length > kMaxFrameLength) {
    throw DecodeError(DecodeError::Kind::Oversized, "frame exceeds 4096 bytes");
  }
  std::vector<std::uint8_t> out(4 + length);
  std::memcpy(out.data(), head, 4);
  if (!recv_exact(fd, out.data() + 4, length)) {
    throw TransportError("connection closed mid-frame");
  }
  return out;
}

inline Socket tcp_connect(const std::string& host, std::uint16_t port,
                          int timeout_seconds) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  const int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &res);
  if (rc != 0) {
    throw TransportError("cannot resolve " + host + ": " + gai_strerror(rc));
  }
  Socket sock;
  int last_errno = ECONNREFUSED;
  for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
    Socket s(::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol));
    if (!s) continue;
    if (::connect(s.get(), ai->ai_addr, ai->ai_addrlen) == 0) {
      sock = std::move(s);
      break;
    }
    last_errno = errno;
  }
  ::freeaddrinfo(res);
  if (!sock) {
    throw TransportError("cannot connect to " + host + ":" + service + ": " +
                         std::strerror(last_errno));
  }
  set_recv_timeout(sock.get(), timeout_seconds);
  return sock;
}

inline Socket tcp_listen(const std::string& host, std::uint16_t port,
                         std::uint16_t* bound_port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  const int rc = ::getaddrinfo(host.empty() ? nullptr : host.c_str(),
                               service.c_str(), &hints, &res);
  if (rc != 0) {
    throw TransportError("cannot resolve bind address " + host + ": " +
                         gai_strerror(rc));
  }
  Socket sock;
  int last_errno = EADDRNOTAVAIL;
  for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
    Socket s(::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol));
    if (!s) continue;
    const int one = 1;
    ::setsockopt(s.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(s.get(), ai->ai_addr, ai->ai_addrlen) == 0 &&
        ::listen(s.get(), SOMAXCONN) == 0) {
      sock = std::move(s);
      break;
    }
    last_errno = errno;
  }
  ::freeaddrinfo(res);
  if (!sock) {
    throw TransportError("cannot bind " + host + ":" + service + ": " +
                         std::strerror(last_errno));
  }
  if (bound_port != nullptr) {
    sockaddr_storage ss{};
    socklen_t len = sizeof ss;
    if (::getsockname(sock.get(), reinterpret_cast<sockaddr*>(&ss), &len) ==
        0) {
      if (ss.ss_family == AF_INET) {
        *bound_port =
            ntohs(reinterpret_cast<const sockaddr_in&>(ss).sin_port);
      } else if (ss.ss_family == AF_INET6) {
        *bound_port =
            ntohs(reinterpret_cast<const sockaddr_in6&>(ss).sin6_port);
      }
    }
  }
  return sock;
}

inline std::string peer_name(int fd) {
  sockaddr_storage ss{};
  socklen_t len = sizeof ss;
  if (::getpeername(fd, reinterpret_cast<sockaddr*>(&ss), &len) != 0) {
    return "?";
  }
  char host[NI_MAXHOST];
  char service[NI_MAXSERV];
  if (::getnameinfo(reinterpret_cast<sockaddr*>(&ss), len, host, sizeof host,
                    service, sizeof service,
                    NI_NUMERICHOST | NI_NUMERICSERV) != 0) {
    return "?";
  }
  return std::string(host) + ":" + service;
}

inline std::string iso8601_utc(Timestamp t) {
  const std::time_t secs = static_cast<std::time_t>(t.seconds);
  std::tm tm{};
  ::gmtime_r(&secs, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline bool equal_constant_time(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  unsigned diff = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff |= static_cast<unsigned char>(a[i]) ^ static_cast<unsigned char>(b[i]);
  }
  return diff == 0;
}

}  // namespace detail

struct HostPort {
  std::string host;
  std::uint16_t port = 0;
};

/// Parses "HOST:PORT"; bracketed IPv6 literals like "[::1]:4600" work too.
inline HostPort parse_host_port(std::string_view text) {
  std::string_view host;
  std::string_view port;
  if (!text.empty() && text.front() == '[') {
    const auto close = text.find(']');
    if (close == std::string_view::npos || close + 1 >= text.size() ||
        text[close + 1] != ':') {
      throw ConfigError("malformed address: " + std::string(text));
    }
    host = text.substr(1, close - 1);
    port = text.substr(close + 2);
  } else {
    const auto colon = text.rfind(':');
    if (colon == std::string_view::npos) {
      throw ConfigError("address must be HOST:PORT: " + std::string(text));
    }
    host = text.substr(0, colon);
    port = text.substr(colon + 1);
  }
  unsigned value = 0;
  const auto [ptr, ec] =
      std::from_chars(port.data(), port.data() + port.size(), value);
  if (ec != std::errc() || ptr != port.data() + port.size() || value > 65535) {
    throw ConfigError("bad port: " + std::string(port));
  }
  if (host.empty()) throw ConfigError("empty host in address");
  return HostPort{std::string(host), static_cast<std::uint16_t>(value)};
}

struct ServerConfig {
  std::string bind_host = "127.0.0.1";
  std::uint16_t port = 0;  // 0 picks a free port
  FreshnessPolicy policy;
  std::string admin_token;  // empty disables registration
  bool allow_toy_hash = false;
  int read_timeout_seconds = 10;
};

/// The authentication daemon. Accepts connections, answers one frame at a
/// time per connection, logs one line per request. Handlers share the
/// read-only secrets; the replay cache is the only mutable shared state.
class Server {
 public:
  Server(AuthoritySecrets secrets, ServerConfig config, Clock& clock,
         std::ostream* log = nullptr)
      : secrets_(std::move(secrets)),
        config_(std::move(config)),
        clock_(clock),
        log_(log) {}

  ~Server() { stop(); }

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds and starts accepting. Throws ConfigError on a bad policy or a
  /// TOY8 secrets file without allow_toy_hash; TransportError on bind
  /// failure.
  void start() {
    validate(config_.policy);
    if (secrets_.alg == HashAlgorithmId::Toy8 && !config_.allow_toy_hash) {
      throw ConfigError(
          "secrets use the toy8 test hash; pass allow_toy_hash to serve them");
    }
    listener_ = detail::tcp_listen(config_.bind_host, config_.port,
                                   &bound_port_);
    running_.store(true);
    accept_thread_ = std::thread([this] { accept_loop(); });
  }

  std::uint16_t port() const { return bound_port_; }

  void stop() {
    if (!running_.exchange(false)) return;
    ::shutdown(listener_.get(), SHUT_RDWR);
    if (accept_thread_.joinable()) accept_thread_.join();
    {
      std::lock_guard<std::mutex> lock(conn_mu_);
      for (auto& conn : connections_) {
        ::shutdown(conn.fd, SHUT_RDWR);
      }
    }
    for (;;) {
      std::thread worker;
      {
        std::lock_guard<std::mutex> lock(conn_mu_);
        if (connections_.empty()) break;
        worker = std::move(connections_.front().worker);
        connections_.pop_front();
      }
      if (worker.joinable()) worker.join();
    }
    listener_.reset();
  }

  /// Blocks until stop() is called from elsewhere (signal handler path).
  void wait() {
    std::unique_lock<std::mutex> lock(wait_mu_);
    wait_cv_.wait(lock, [this] { return !running_.load(); });
  }

 private:
  struct Connection {
    int fd = -1;
    std::thread worker;
    std::atomic<bool> done{false};
  };

  void accept_loop() {
    while (running_.load()) {
      const int cfd = ::accept(listener_.get(), nullptr, nullptr);
      if (cfd < 0) {
        if (errno == EINTR) continue;
        break;  // listener shut down or unusable
      }
      detail::set_recv_timeout(cfd, config_.read_timeout_seconds);
      std::lock_guard<std::mutex> lock(conn_mu_);
      reap_finished_locked();
      connections_.emplace_back();
      Connection& conn = connections_.back();
      conn.fd = cfd;
      conn.worker = std::thread([this, cfd, &conn] {
        serve_connection(cfd);
        ::close(cfd);
        conn.done.store(true);
      });
    }
    {
      std::lock_guard<std::mutex> lock(wait_mu_);
      running_.store(false);
    }
    wait_cv_.notify_all();
  }

  void reap_finished_locked() {
    for (auto it = connections_.begin(); it != connections_.end();) {
      if (it->done.load()) {
        if (it->worker.joinable()) it->worker.join();
        it = connections_.erase(it);
      } else {
        ++it;
      }
    }
  }

  void serve_connection(int fd) {
    const std::string peer = detail::peer_name(fd);
    for (;;) {
      std::vector<std::uint8_t> raw;
      try {
        raw = detail::recv_frame_bytes(fd);
      } catch (const DecodeError&) {
        best_effort_error(fd);
        return;
      } catch (const TransportError&) {
        return;  // timeout, reset, or close mid-frame
      }
      if (raw.empty()) return;  // clean EOF

      std::vector<std::uint8_t> response;
      try {
        response = handle_frame(decode_frame(raw), peer);
      } catch (const DecodeError&) {
        best_effort_error(fd);
        return;
      } catch (const std::exception& e) {
        log_line("error", std::string("internal: ") + e.what(), peer);
        best_effort_error(fd);
        return;
      }
      try {
        detail::send_all(fd, response);
      } catch (const TransportError&) {
        return;
      }
    }
  }

  std::vector<std::uint8_t> handle_frame(const Frame& frame,
                                         const std::string& peer) {
    switch (frame.type) {
      case MessageType::LoginRequest: {
        const LoginMessage msg = decode_login_request_payload(frame.payload);
        const Timestamp t_now = clock_.now();
        const Verdict verdict =
            verify(secrets_, config_.policy, msg, t_now, &cache_);
        log_request("login", to_string(verdict), msg.t, t_now, peer);
        return encode_login_response(to_status(verdict));
      }
      case MessageType::RegisterRequest: {
        const RegisterRequest req =
            decode_register_request_payload(frame.payload);
        std::optional<CardImage> card;
        if (!config_.admin_token.empty() &&
            detail::equal_constant_time(req.token, config_.admin_token)) {
          try {
            card = register_user(secrets_, req.password);
          } catch (const PasswordError&) {
            card.reset();
          }
        }
        log_line("register", card ? "issued" : "denied", peer);
        return encode_register_response(card);
      }
      case MessageType::LoginResponse:
      case MessageType::RegisterResponse:
        throw DecodeError(DecodeError::Kind::UnexpectedType,
                          "response frame sent to server");
    }
    throw DecodeError(DecodeError::Kind::UnknownMessageType,
                      "unhandled message type");
  }

  // Error response followed by a lingering close, so the status byte
  // reaches the peer instead of being clobbered by a reset when unread
  // request bytes remain in the socket.
  void best_effort_error(int fd) {
    try {
      detail::send_all(fd, encode_login_response(LoginStatus::ServerError));
    } catch (const TransportError&) {
      return;
    }
    ::shutdown(fd, SHUT_WR);
    detail::set_recv_timeout(fd, 1);
    std::uint8_t sink[4096];
    std::size_t drained = 0;
    while (drained < 65536) {
      const ssize_t k = ::recv(fd, sink, sizeof sink, 0);
      if (k <= 0) break;
      drained += static_cast<std::size_t>(k);
    }
  }

  // One line per request, tab-separated:
  //   ISO-8601 time | type | verdict | T | T*-T | peer
  void log_request(const char* type, const char* verdict, Timestamp t,
                   Timestamp t_now, const std::string& peer) {
    if (log_ == nullptr) return;
    const std::int64_t age = static_cast<std::int64_t>(t_now.seconds) -
                             static_cast<std::int64_t>(t.seconds);
    std::lock_guard<std::mutex> lock(log_mu_);
    *log_ << detail::iso8601_utc(t_now) << '\t' << type << '\t' << verdict
          << '\t' << t.seconds << '\t' << age << '\t' << peer << '\n';
    log_->flush();
  }

  void log_line(const char* type, const std::string& note,
                const std::string& peer) {
    if (log_ == nullptr) return;
    std::lock_guard<std::mutex> lock(log_mu_);
    *log_ << detail::iso8601_utc(clock_.now()) << '\t' << type << '\t' << note
          << "\t-\t-\t" << peer << '\n';
    log_->flush();
  }

  AuthoritySecrets secrets_;
  ServerConfig config_;
  Clock& clock_;
  std::ostream* log_;
  std::mutex log_mu_;
  ReplayCache cache_;
  detail::Socket listener_;
  std::uint16_t bound_port_ = 0;
  std::atomic<bool> running_{false};
  std::thread accept_thread_;
  std::mutex conn_mu_;
  std::list<Connection> connections_;
  std::mutex wait_mu_;
  std::condition_variable wait_cv_;
};

/// Sends one raw frame and reads one response frame. The harness uses this
/// to replay captured bytes verbatim.
inline std::vector<std::uint8_t> roundtrip_raw(
    const HostPort& addr, std::span<const std::uint8_t> frame_bytes,
    int timeout_seconds = 10) {
  detail::Socket sock =
      detail::tcp_connect(addr.host, addr.port, timeout_seconds);
  detail::send_all(sock.get(), frame_bytes);
  auto response = detail::recv_frame_bytes(sock.get());
  if (response.empty()) throw TransportError("server closed the connection");
  return response;
}

/// The user terminal's login flow: build the message at clock.now(), send
/// it, map the response status. Transport and protocol problems are
/// exceptions, not verdicts.
inline Verdict client_login(const HostPort& addr, const CardImage& card,
                            std::string_view pw, Clock& clock,
                            int timeout_seconds = 10) {
  const LoginMessage msg = build_login(card, pw, clock.now());
  const auto response = roundtrip_raw(addr, encode_login_request(msg),
                                      timeout_seconds);
  const Frame frame = decode_frame(response);
  if (frame.type != MessageType::LoginResponse) {
    throw ProtocolError("expected a login response frame");
  }
  const LoginStatus status = decode_login_response_payload(frame.payload);
  if (status == LoginStatus::ServerError) {
    throw ProtocolError("server reported an internal error");
  }
  return verdict_from_status(status);
}

/// Registration over the admin-token channel. Returns the issued card;
/// persisting it is the caller's job.
inline CardImage client_register(const HostPort& addr,
                                 std::string_view admin_token,
                                 std::string_view pw,
                                 int timeout_seconds = 10) {
  const RegisterRequest req{std::string(admin_token), std::string(pw)};
  const auto response =
      roundtrip_raw(addr, encode_register_request(req), timeout_seconds);
  const Frame frame = decode_frame(response);
  if (frame.type != MessageType::RegisterResponse) {
    throw ProtocolError("expected a register response frame");
  }
  const auto card = decode_register_response_payload(frame.payload);
  if (!card) {
    throw RegistrationDenied("server refused to issue a card");
  }
  return *card;
}

}  // namespace dynid
