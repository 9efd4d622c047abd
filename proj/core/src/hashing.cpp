#include "malsig/hashing.hpp"

#include <openssl/evp.h>
#include <zlib.h>

#include <memory>

#include "malsig/error.hpp"

namespace malsig {

Sha256 sha256(std::span<const std::uint8_t> data) {
  Sha256 out{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 || len != out.size())
    throw Error(Errc::IOFailure, "SHA-256 computation failed");
  return out;
}

std::string to_hex(const Sha256& digest) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s;
  s.reserve(64);
  for (auto b : digest) {
    s.push_back(kDigits[b >> 4]);
    s.push_back(kDigits[b & 0xF]);
  }
  return s;
}

Sha256 sha256_from_hex(std::string_view hex) {
  auto nibble = [&](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  if (hex.size() != 64) throw Error(Errc::InvalidConfig, "sha256 must be 64 hex digits");
  Sha256 out{};
  for (std::size_t i = 0; i < 32; ++i) {
    const int hi = nibble(hex[2 * i]), lo = nibble(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) throw Error(Errc::InvalidConfig, "sha256 contains a non-hex character");
    out[i] = static_cast<std::uint8_t>(hi << 4 | lo);
  }
  return out;
}

std::uint32_t crc32(std::span<const std::uint8_t> data, std::uint32_t running) {
  uLong crc = running;
  std::size_t off = 0;
  while (off < data.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(data.size() - off, 1u << 30));
    crc = ::crc32(crc, data.data() + off, chunk);
    off += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace malsig
