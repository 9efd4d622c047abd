#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace malsig {

using Sha256 = std::array<std::uint8_t, 32>;

Sha256 sha256(std::span<const std::uint8_t> data);
std::string to_hex(const Sha256& digest);
// Throws Error(InvalidConfig) unless hex is 64 hex digits.
Sha256 sha256_from_hex(std::string_view hex);

std::uint32_t crc32(std::span<const std::uint8_t> data, std::uint32_t running = 0);

}  // namespace malsig
