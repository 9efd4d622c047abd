#include "malsig/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "malsig/error.hpp"

namespace malsig {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Drops a trailing comment that is not inside a string.
std::string_view strip_comment(std::string_view s) {
  bool in_string = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"' && (i == 0 || s[i - 1] != '\\')) in_string = !in_string;
    if (s[i] == '#' && !in_string) return s.substr(0, i);
  }
  return s;
}

[[noreturn]] void fail(std::size_t line, const std::string& why) {
  throw Error(Errc::InvalidConfig, "config line " + std::to_string(line) + ": " + why);
}

nlohmann::json scalar(std::string_view v, std::size_t line) {
  if (v.empty()) fail(line, "missing value");
  if (v.front() == '"') {
    if (v.size() < 2 || v.back() != '"') fail(line, "unterminated string");
    std::string out;
    for (std::size_t i = 1; i + 1 < v.size(); ++i) {
      if (v[i] == '\\' && i + 2 < v.size()) {
        const char c = v[++i];
        out.push_back(c == 'n' ? '\n' : c == 't' ? '\t' : c);
      } else {
        out.push_back(v[i]);
      }
    }
    return out;
  }
  if (v == "true") return true;
  if (v == "false") return false;
  std::int64_t i = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), i);
  if (ec == std::errc() && p == v.data() + v.size()) return i;
  double d = 0;
  auto [pd, ecd] = std::from_chars(v.data(), v.data() + v.size(), d);
  if (ecd == std::errc() && pd == v.data() + v.size()) return d;
  fail(line, "cannot parse value '" + std::string(v) + "'");
}

nlohmann::json value(std::string_view v, std::size_t line) {
  if (!v.empty() && v.front() == '[') {
    if (v.back() != ']') fail(line, "unterminated array");
    nlohmann::json arr = nlohmann::json::array();
    std::string_view body = trim(v.substr(1, v.size() - 2));
    while (!body.empty()) {
      std::size_t comma = std::string_view::npos;
      bool in_string = false;
      for (std::size_t i = 0; i < body.size(); ++i) {
        if (body[i] == '"') in_string = !in_string;
        if (body[i] == ',' && !in_string) {
          comma = i;
          break;
        }
      }
      arr.push_back(scalar(trim(body.substr(0, comma)), line));
      if (comma == std::string_view::npos) break;
      body = trim(body.substr(comma + 1));
    }
    return arr;
  }
  return scalar(v, line);
}

}  // namespace

nlohmann::json parse_config(std::string_view text) {
  nlohmann::json root = nlohmann::json::object();
  std::string section;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  for (std::string raw; std::getline(in, raw);) {
    ++line_no;
    const auto line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(line_no, "unterminated section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (section.empty()) fail(line_no, "empty section name");
      root[section] = root.value(section, nlohmann::json::object());
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail(line_no, "expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    if (key.empty()) fail(line_no, "empty key");
    root[section][key] = value(trim(line.substr(eq + 1)), line_no);
  }
  return root;
}

nlohmann::json load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IOFailure, "cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace malsig
