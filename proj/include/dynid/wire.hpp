#pragma once

#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dynid/authority.hpp"
#include "dynid/card.hpp"
#include "dynid/digest.hpp"
#include "dynid/error.hpp"

namespace dynid {

// Framing: length u32 BE | type u8 | payload, where length = 1 + payload
// size. Big-endian throughout, fixed field order, 4096-byte cap.

inline constexpr std::uint32_t kMaxFrameLength = 4096;

enum class MessageType : std::uint8_t {
  LoginRequest = 0x01,
  LoginResponse = 0x02,
  RegisterRequest = 0x10,
  RegisterResponse = 0x11,
};

constexpr bool known_message_type(std::uint8_t t) {
  return t == 0x01 || t == 0x02 || t == 0x10 || t == 0x11;
}

constexpr const char* to_string(MessageType t) {
  switch (t) {
    case MessageType::LoginRequest:
      return "login-request";
    case MessageType::LoginResponse:
      return "login-response";
    case MessageType::RegisterRequest:
      return "register-request";
    case MessageType::RegisterResponse:
      return "register-response";
  }
  return "?";
}

struct Frame {
  MessageType type = MessageType::LoginRequest;
  std::vector<std::uint8_t> payload;
};

namespace detail {

inline void put_u16be(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

inline void put_u32be(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 3; i >= 0; --i) {
    out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
}

inline void put_u64be(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 7; i >= 0; --i) {
    out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
}

inline std::uint32_t get_u32be(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) << 24 |
         static_cast<std::uint32_t>(p[1]) << 16 |
         static_cast<std::uint32_t>(p[2]) << 8 | static_cast<std::uint32_t>(p[3]);
}

inline std::uint64_t get_u64be(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = v << 8 | p[i];
  return v;
}

// Sequential payload reader that refuses to run past the end.
class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

  std::span<const std::uint8_t> take(std::size_t n) {
    if (data_.size() - pos_ < n) {
      throw DecodeError(DecodeError::Kind::Truncated, "payload too short");
    }
    auto out = data_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

  std::uint8_t u8() { return take(1)[0]; }

  std::uint16_t u16be() {
    auto b = take(2);
    return static_cast<std::uint16_t>(b[0] << 8 | b[1]);
  }

  std::uint64_t u64be() { return get_u64be(take(8).data()); }

  Digest digest() {
    Digest d;
    auto b = take(kDigestSize);
    std::memcpy(d.bytes.data(), b.data(), kDigestSize);
    return d;
  }

  void expect_end() const {
    if (pos_ != data_.size()) {
      throw DecodeError(DecodeError::Kind::LengthMismatch,
                        "payload longer than its fields");
    }
  }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<std::uint8_t> encode_frame(
    MessageType type, std::span<const std::uint8_t> payload) {
  const std::uint32_t length = static_cast<std::uint32_t>(1 + payload.size());
  if (length > kMaxFrameLength) {
    throw DecodeError(DecodeError::Kind::Oversized, "frame exceeds 4096 bytes");
  }
  std::vector<std::uint8_t> out;
  out.reserve(4 + length);
  detail::put_u32be(out, length);
  out.push_back(static_cast<std::uint8_t>(type));
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

/// Parses one complete frame; the buffer must contain exactly that frame,
/// trailing bytes are an error.
inline Frame decode_frame(std::span<const std::uint8_t> buffer) {
  if (buffer.size() < 4) {
    throw DecodeError(DecodeError::Kind::Truncated, "frame header incomplete");
  }
  const std::uint32_t length = detail::get_u32be(buffer.data());
  if (length < 1) {
    throw DecodeError(DecodeError::Kind::LengthMismatch,
                      "frame length below minimum");
  }
  if (length > kMaxFrameLength) {
    throw DecodeError(DecodeError::Kind::Oversized, "frame exceeds 4096 bytes");
  }
  if (buffer.size() < 4 + static_cast<std::size_t>(length)) {
    throw DecodeError(DecodeError::Kind::Truncated, "frame body incomplete");
  }
  if (buffer.size() > 4 + static_cast<std::size_t>(length)) {
    throw DecodeError(DecodeError::Kind::TrailingData,
                      "bytes after end of frame");
  }
  if (!known_message_type(buffer[4])) {
    throw DecodeError(DecodeError::Kind::UnknownMessageType,
                      "unknown message type byte");
  }
  Frame f;
  f.type = static_cast<MessageType>(buffer[4]);
  f.payload.assign(buffer.begin() + 5, buffer.end());
  return f;
}

// Login request payload: CID (32) | N (32) | C (32) | T (u64 BE) = 104.

inline std::vector<std::uint8_t> encode_login_request(const LoginMessage& m) {
  std::vector<std::uint8_t> payload;
  payload.reserve(104);
  payload.insert(payload.end(), m.cid.bytes.begin(), m.cid.bytes.end());
  payload.insert(payload.end(), m.n.bytes.begin(), m.n.bytes.end());
  payload.insert(payload.end(), m.c.bytes.begin(), m.c.bytes.end());
  detail::put_u64be(payload, m.t.seconds);
  return encode_frame(MessageType::LoginRequest, payload);
}

inline LoginMessage decode_login_request_payload(
    std::span<const std::uint8_t> payload) {
  detail::Reader r(payload);
  LoginMessage m;
  m.cid = r.digest();
  m.n = r.digest();
  m.c = r.digest();
  m.t = Timestamp{r.u64be()};
  r.expect_end();
  return m;
}

// Login response payload: one status byte.

enum class LoginStatus : std::uint8_t {
  Accept = 0x00,
  Expired = 0x01,
  FutureDated = 0x02,
  BadAuthenticator = 0x03,
  Replayed = 0x04,
  ServerError = 0x7F,
};

constexpr LoginStatus to_status(Verdict v) {
  return static_cast<LoginStatus>(v);
}

constexpr Verdict verdict_from_status(LoginStatus s) {
  return static_cast<Verdict>(s);
}

inline std::vector<std::uint8_t> encode_login_response(LoginStatus s) {
  const std::uint8_t payload[1] = {static_cast<std::uint8_t>(s)};
  return encode_frame(MessageType::LoginResponse, payload);
}

inline LoginStatus decode_login_response_payload(
    std::span<const std::uint8_t> payload) {
  detail::Reader r(payload);
  const std::uint8_t s = r.u8();
  r.expect_end();
  if (s > 0x04 && s != 0x7F) {
    throw DecodeError(DecodeError::Kind::UnknownStatus,
                      "unknown login status byte");
  }
  return static_cast<LoginStatus>(s);
}

// Register request payload: token_len u16 BE | token | pw_len u16 BE | pw.

struct RegisterRequest {
  std::string token;
  std::string password;

  auto operator<=>(const RegisterRequest&) const = default;
};

inline std::vector<std::uint8_t> encode_register_request(
    const RegisterRequest& req) {
  if (req.token.size() > 0xFFFF || req.password.size() > 0xFFFF) {
    throw DecodeError(DecodeError::Kind::Oversized, "field exceeds u16 length");
  }
  std::vector<std::uint8_t> payload;
  payload.reserve(4 + req.token.size() + req.password.size());
  detail::put_u16be(payload, static_cast<std::uint16_t>(req.token.size()));
  payload.insert(payload.end(), req.token.begin(), req.token.end());
  detail::put_u16be(payload, static_cast<std::uint16_t>(req.password.size()));
  payload.insert(payload.end(), req.password.begin(), req.password.end());
  return encode_frame(MessageType::RegisterRequest, payload);
}

inline RegisterRequest decode_register_request_payload(
    std::span<const std::uint8_t> payload) {
  detail::Reader r(payload);
  RegisterRequest req;
  const std::uint16_t token_len = r.u16be();
  auto tok = r.take(token_len);
  req.token.assign(tok.begin(), tok.end());
  const std::uint16_t pw_len = r.u16be();
  auto pw = r.take(pw_len);
  req.password.assign(pw.begin(), pw.end());
  r.expect_end();
  return req;
}

// Register response payload: status u8, then alg | N | y when issued.

inline std::vector<std::uint8_t> encode_register_response(
    const std::optional<CardImage>& card) {
  std::vector<std::uint8_t> payload;
  if (card) {
    payload.reserve(66);
    payload.push_back(0x00);
    payload.push_back(static_cast<std::uint8_t>(card->alg));
    payload.insert(payload.end(), card->n.bytes.begin(), card->n.bytes.end());
    payload.insert(payload.end(), card->y.bytes.begin(), card->y.bytes.end());
  } else {
    payload.push_back(0x01);
  }
  return encode_frame(MessageType::RegisterResponse, payload);
}

inline std::optional<CardImage> decode_register_response_payload(
    std::span<const std::uint8_t> payload) {
  detail::Reader r(payload);
  const std::uint8_t status = r.u8();
  if (status == 0x01) {
    r.expect_end();
    return std::nullopt;
  }
  if (status != 0x00) {
    throw DecodeError(DecodeError::Kind::UnknownStatus,
                      "unknown register status byte");
  }
  const std::uint8_t alg_byte = r.u8();
  if (!known_algorithm(alg_byte)) {
    throw DecodeError(DecodeError::Kind::UnknownAlgorithm,
                      "unknown hash algorithm id");
  }
  CardImage card;
  card.alg = static_cast<HashAlgorithmId>(alg_byte);
  card.n = r.digest();
  card.y = r.digest();
  r.expect_end();
  return card;
}

}  // namespace dynid
