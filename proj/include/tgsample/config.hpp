#pragma once

// Flat key=value configuration text. Blank lines and lines starting with '#'
// are skipped; whitespace around keys and values is trimmed. Later keys
// overwrite earlier ones.

#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>

#include "tgsample/error.hpp"

namespace tgsample {

using KeyValues = std::map<std::string, std::string>;

namespace detail {

inline std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace detail

inline KeyValues parse_key_values(std::istream& in) {
  KeyValues kv;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = detail::trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos && eq > 0, ErrorCode::MalformedRow,
            "config line " + std::to_string(line_no) + ": expected key=value");
    kv[detail::trim(line.substr(0, eq))] = detail::trim(line.substr(eq + 1));
  }
  return kv;
}

inline KeyValues parse_key_values(const std::string& text) {
  std::istringstream in(text);
  return parse_key_values(in);
}

inline KeyValues load_key_values(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open config " + path);
  return parse_key_values(in);
}

inline void write_key_values(const KeyValues& kv, std::ostream& out) {
  for (const auto& [k, v] : kv) out << k << '=' << v << '\n';
}

}  // namespace tgsample
