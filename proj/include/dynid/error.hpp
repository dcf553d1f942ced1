#pragma once

#include <stdexcept>
#include <string>

namespace dynid {

/// Base type for everything this library throws.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Password fails the encoding rules (1..1024 bytes of UTF-8).
struct PasswordError : Error {
  enum class Kind { Empty, TooLong };
  PasswordError(Kind k, const std::string& what) : Error(what), kind(k) {}
  Kind kind;
};

/// An algorithm id outside the registered set.
struct UnknownAlgorithmError : Error {
  using Error::Error;
};

/// A persisted card or secrets file is unusable.
struct FileFormatError : Error {
  enum class Kind {
    BadMagic,
    UnknownVersion,
    UnknownAlgorithm,
    Truncated,
    TrailingData,
    Io,
  };
  FileFormatError(Kind k, const std::string& what) : Error(what), kind(k) {}
  Kind kind;
};

/// A wire frame or payload does not parse.
struct DecodeError : Error {
  enum class Kind {
    Truncated,
    Oversized,
    UnknownMessageType,
    UnexpectedType,
    LengthMismatch,
    TrailingData,
    UnknownAlgorithm,
    UnknownStatus,
  };
  DecodeError(Kind k, const std::string& what) : Error(what), kind(k) {}
  Kind kind;
};

/// Socket-level failure talking to a peer (refused, timeout, reset).
struct TransportError : Error {
  using Error::Error;
};

/// The peer spoke the protocol wrong (bad response type, error status).
struct ProtocolError : Error {
  using Error::Error;
};

/// The server refused to issue a card.
struct RegistrationDenied : Error {
  using Error::Error;
};

/// Invalid server or policy configuration.
struct ConfigError : Error {
  using Error::Error;
};

}  // namespace dynid
