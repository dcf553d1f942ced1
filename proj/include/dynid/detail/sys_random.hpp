#pragma once

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstddef>
#include <cstdint>
#include <span>

#include "dynid/error.hpp"

namespace dynid::detail {

// System CSPRNG: getentropy, falling back to /dev/urandom.
inline void fill_random(std::span<std::uint8_t> out) {
  std::size_t off = 0;
  while (off < out.size()) {
    const std::size_t chunk = std::min<std::size_t>(out.size() - off, 256);
    if (::getentropy(out.data() + off, chunk) == 0) {
      off += chunk;
      continue;
    }
    break;
  }
  if (off == out.size()) return;

  const int fd = ::open("/dev/urandom", O_RDONLY);
  if (fd < 0) throw Error("no randomness source available");
  while (off < out.size()) {
    const ssize_t k = ::read(fd, out.data() + off, out.size() - off);
    if (k <= 0) {
      if (k < 0 && errno == EINTR) continue;
      ::close(fd);
      throw Error("randomness source failure");
    }
    off += static_cast<std::size_t>(k);
  }
  ::close(fd);
}

inline std::uint64_t random_u64() {
  std::uint8_t buf[8];
  fill_random(buf);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = v << 8 | buf[i];
  return v;
}

}  // namespace dynid::detail
