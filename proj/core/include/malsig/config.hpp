#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

namespace malsig {

// Parses the small TOML subset used by malsig config files:
//
//   # comment
//   [section]
//   key = "string" | 123 | 4.5 | true | [8, 8, 4]
//
// into a JSON object of sections ("" holds top-level keys). Throws
// Error(InvalidConfig) with a line number on malformed input.
nlohmann::json parse_config(std::string_view text);
nlohmann::json load_config(const std::filesystem::path& path);

}  // namespace malsig
