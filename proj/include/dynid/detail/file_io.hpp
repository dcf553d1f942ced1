#pragma once

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dynid/digest.hpp"
#include "dynid/error.hpp"
#include "dynid/hash.hpp"

namespace dynid::detail {

// Both persisted artifacts share one 70-byte layout:
//   magic (4) | version 0x01 | alg (1) | first block (32) | second block (32)
inline constexpr std::size_t kRecordSize = 70;
inline constexpr std::uint8_t kFileVersion = 0x01;

struct FileRecord {
  HashAlgorithmId alg = HashAlgorithmId::Sha256;
  Digest first;
  Digest second;
};

inline std::array<std::uint8_t, kRecordSize> encode_record(
    const char magic[4], const FileRecord& rec) {
  std::array<std::uint8_t, kRecordSize> out{};
  std::memcpy(out.data(), magic, 4);
  out[4] = kFileVersion;
  out[5] = static_cast<std::uint8_t>(rec.alg);
  std::memcpy(out.data() + 6, rec.first.bytes.data(), kDigestSize);
  std::memcpy(out.data() + 38, rec.second.bytes.data(), kDigestSize);
  return out;
}

inline FileRecord decode_record(const char magic[4],
                                std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kRecordSize) {
    throw FileFormatError(FileFormatError::Kind::Truncated, "truncated file");
  }
  if (std::memcmp(bytes.data(), magic, 4) != 0) {
    throw FileFormatError(FileFormatError::Kind::BadMagic, "bad magic");
  }
  if (bytes[4] != kFileVersion) {
    throw FileFormatError(FileFormatError::Kind::UnknownVersion,
                          "unknown file version");
  }
  if (!known_algorithm(bytes[5])) {
    throw FileFormatError(FileFormatError::Kind::UnknownAlgorithm,
                          "unknown hash algorithm id");
  }
  if (bytes.size() > kRecordSize) {
    throw FileFormatError(FileFormatError::Kind::TrailingData,
                          "trailing bytes after record");
  }
  FileRecord rec;
  rec.alg = static_cast<HashAlgorithmId>(bytes[5]);
  std::memcpy(rec.first.bytes.data(), bytes.data() + 6, kDigestSize);
  std::memcpy(rec.second.bytes.data(), bytes.data() + 38, kDigestSize);
  return rec;
}

// Whole-file atomic replace: write a temp file alongside the target with
// owner-only permissions, then rename over it.
inline void write_file_atomic(const std::filesystem::path& path,
                              std::span<const std::uint8_t> data) {
  const std::filesystem::path dir =
      path.has_parent_path() ? path.parent_path() : ".";
  std::string tmp = (dir / (path.filename().string() + ".tmpXXXXXX")).string();
  const int fd = ::mkstemp(tmp.data());
  if (fd < 0) {
    throw FileFormatError(FileFormatError::Kind::Io,
                          "cannot create temp file in " + dir.string() + ": " +
                              std::strerror(errno));
  }
  bool ok = ::fchmod(fd, S_IRUSR | S_IWUSR) == 0;
  std::size_t off = 0;
  while (ok && off < data.size()) {
    const ssize_t k = ::write(fd, data.data() + off, data.size() - off);
    if (k < 0) {
      if (errno == EINTR) continue;
      ok = false;
      break;
    }
    off += static_cast<std::size_t>(k);
  }
  ok = ok && ::fsync(fd) == 0;
  ::close(fd);
  ok = ok && ::rename(tmp.c_str(), path.c_str()) == 0;
  if (!ok) {
    const int err = errno;
    ::unlink(tmp.c_str());
    throw FileFormatError(FileFormatError::Kind::Io,
                          "cannot write " + path.string() + ": " +
                              std::strerror(err));
  }
}

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  const int fd = ::open(path.c_str(), O_RDONLY);
  if (fd < 0) {
    throw FileFormatError(FileFormatError::Kind::Io,
                          "cannot open " + path.string() + ": " +
                              std::strerror(errno));
  }
  std::vector<std::uint8_t> out;
  std::uint8_t buf[4096];
  for (;;) {
    const ssize_t k = ::read(fd, buf, sizeof buf);
    if (k < 0) {
      if (errno == EINTR) continue;
      const int err = errno;
      ::close(fd);
      throw FileFormatError(FileFormatError::Kind::Io,
                            "cannot read " + path.string() + ": " +
                                std::strerror(err));
    }
    if (k == 0) break;
    out.insert(out.end(), buf, buf + k);
  }
  ::close(fd);
  return out;
}

}  // namespace dynid::detail
