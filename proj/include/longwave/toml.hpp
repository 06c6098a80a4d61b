#pragma once

#include <cctype>
#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "longwave/errors.hpp"

namespace longwave::toml {

/// Minimal TOML subset for flat config files: `key = value` lines with
/// booleans, integers, floats, quoted strings, single-line arrays of those,
/// and `#` comments. Tables/sections and multi-line syntax are rejected.
struct Value {
  std::variant<bool, std::int64_t, double, std::string, std::vector<Value>> data;

  bool is_array() const { return std::holds_alternative<std::vector<Value>>(data); }
  double as_double() const {
    if (std::holds_alternative<double>(data)) return std::get<double>(data);
    if (std::holds_alternative<std::int64_t>(data))
      return static_cast<double>(std::get<std::int64_t>(data));
    throw ConfigError("expected a numeric value");
  }
  std::int64_t as_int() const {
    if (std::holds_alternative<std::int64_t>(data)) return std::get<std::int64_t>(data);
    throw ConfigError("expected an integer value");
  }
  const std::string& as_string() const {
    if (std::holds_alternative<std::string>(data)) return std::get<std::string>(data);
    throw ConfigError("expected a string value");
  }
  bool as_bool() const {
    if (std::holds_alternative<bool>(data)) return std::get<bool>(data);
    throw ConfigError("expected a boolean value");
  }
  const std::vector<Value>& as_array() const {
    if (is_array()) return std::get<std::vector<Value>>(data);
    throw ConfigError("expected an array value");
  }
};

using Table = std::map<std::string, Value>;

namespace detail {

inline void skip_ws(const std::string& s, std::size_t& i) {
  while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
}

inline Value parse_scalar(const std::string& s, std::size_t& i, int line);

inline Value parse_value(const std::string& s, std::size_t& i, int line) {
  skip_ws(s, i);
  if (i >= s.size()) throw ConfigError("line " + std::to_string(line) + ": missing value");
  if (s[i] == '[') {
    ++i;
    std::vector<Value> items;
    skip_ws(s, i);
    if (i < s.size() && s[i] == ']') {
      ++i;
      return Value{std::move(items)};
    }
    for (;;) {
      items.push_back(parse_value(s, i, line));
      skip_ws(s, i);
      if (i < s.size() && s[i] == ',') {
        ++i;
        continue;
      }
      if (i < s.size() && s[i] == ']') {
        ++i;
        return Value{std::move(items)};
      }
      throw ConfigError("line " + std::to_string(line) + ": malformed array");
    }
  }
  return parse_scalar(s, i, line);
}

inline Value parse_scalar(const std::string& s, std::size_t& i, int line) {
  if (s[i] == '"') {
    std::string out;
    for (++i; i < s.size(); ++i) {
      if (s[i] == '"') {
        ++i;
        return Value{std::move(out)};
      }
      if (s[i] == '\\' && i + 1 < s.size()) {
        ++i;
        out.push_back(s[i] == 'n' ? '\n' : s[i] == 't' ? '\t' : s[i]);
      } else {
        out.push_back(s[i]);
      }
    }
    throw ConfigError("line " + std::to_string(line) + ": unterminated string");
  }
  std::size_t start = i;
  while (i < s.size() && s[i] != ',' && s[i] != ']' && s[i] != '#' &&
         s[i] != ' ' && s[i] != '\t')
    ++i;
  std::string tok = s.substr(start, i - start);
  if (tok == "true") return Value{true};
  if (tok == "false") return Value{false};
  const bool is_float = tok.find_first_of(".eE") != std::string::npos;
  try {
    std::size_t used = 0;
    if (is_float) {
      const double v = std::stod(tok, &used);
      if (used == tok.size()) return Value{v};
    } else {
      const std::int64_t v = std::stoll(tok, &used);
      if (used == tok.size()) return Value{v};
    }
  } catch (...) {
  }
  throw ConfigError("line " + std::to_string(line) + ": cannot parse value '" + tok + "'");
}

}  // namespace detail

inline Table parse(const std::string& text) {
  Table table;
  std::size_t pos = 0;
  int line = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string s = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line;
    if (!s.empty() && s.back() == '\r') s.pop_back();
    std::size_t i = 0;
    detail::skip_ws(s, i);
    if (i >= s.size() || s[i] == '#') {
      if (pos > text.size()) break;
      continue;
    }
    if (s[i] == '[')
      throw ConfigError("line " + std::to_string(line) +
                        ": sections are not supported; use flat keys");
    std::size_t kstart = i;
    while (i < s.size() && (std::isalnum(static_cast<unsigned char>(s[i])) ||
                            s[i] == '_' || s[i] == '-' || s[i] == '.'))
      ++i;
    std::string key = s.substr(kstart, i - kstart);
    detail::skip_ws(s, i);
    if (key.empty() || i >= s.size() || s[i] != '=')
      throw ConfigError("line " + std::to_string(line) + ": expected 'key = value'");
    ++i;
    Value v = detail::parse_value(s, i, line);
    detail::skip_ws(s, i);
    if (i < s.size() && s[i] != '#')
      throw ConfigError("line " + std::to_string(line) + ": trailing characters");
    table[key] = std::move(v);
    if (pos > text.size()) break;
  }
  return table;
}

}  // namespace longwave::toml
