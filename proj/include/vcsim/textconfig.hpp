#pragma once

#include <charconv>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "vcsim/common.hpp"
#include "vcsim/geometry.hpp"

namespace vcsim::text {

// Line-oriented nested key/value format:
//   top-level `key = value` pairs, then repeatable `[section]` or
//   `[section.sub]` blocks of further pairs. `#` starts a comment. Keys may
//   repeat inside a block to form lists.

inline std::string trim(std::string_view s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.push_back(trim(s.substr(start, i - start)));
      start = i + 1;
    }
  }
  return out;
}

inline double parse_num(const std::string& s, const std::string& where) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw format_error("not a number: '" + s + "' (" + where + ")");
  }
}

struct entry {
  std::string key;
  std::string value;
  int line = 0;
};

struct section {
  std::string name;  // "" for the top-level block
  int line = 0;
  std::vector<entry> entries;

  bool has(const std::string& key) const {
    for (const auto& e : entries)
      if (e.key == key) return true;
    return false;
  }

  std::optional<std::string> get(const std::string& key) const {
    for (const auto& e : entries)
      if (e.key == key) return e.value;
    return std::nullopt;
  }

  std::string str(const std::string& key) const {
    auto v = get(key);
    if (!v) throw format_error("missing key '" + key + "' in [" + (name.empty() ? "top level" : name) + "]");
    return *v;
  }

  std::string str_or(const std::string& key, const std::string& def) const {
    auto v = get(key);
    return v ? *v : def;
  }

  double num(const std::string& key) const { return parse_num(str(key), "key '" + key + "'"); }

  double num_or(const std::string& key, double def) const {
    auto v = get(key);
    return v ? parse_num(*v, "key '" + key + "'") : def;
  }

  long integer(const std::string& key) const {
    double v = num(key);
    long r = std::lround(v);
    if (std::abs(v - static_cast<double>(r)) > 1e-9)
      throw format_error("key '" + key + "' must be an integer, got '" + str(key) + "'");
    return r;
  }

  std::vector<std::string> all(const std::string& key) const {
    std::vector<std::string> out;
    for (const auto& e : entries)
      if (e.key == key) out.push_back(e.value);
    return out;
  }

  // "x, y" pair
  vec2 point(const std::string& key) const { return parse_point(str(key), key); }

  static vec2 parse_point(const std::string& v, const std::string& where) {
    auto parts = split(v, ',');
    if (parts.size() != 2) throw format_error("expected 'x, y' for " + where + ", got '" + v + "'");
    return {parse_num(parts[0], where), parse_num(parts[1], where)};
  }
};

struct document {
  section top;
  std::vector<section> sections;

  std::vector<const section*> all_sections(const std::string& name) const {
    std::vector<const section*> out;
    for (const auto& s : sections)
      if (s.name == name) out.push_back(&s);
    return out;
  }

  const section* find(const std::string& name) const {
    for (const auto& s : sections)
      if (s.name == name) return &s;
    return nullptr;
  }

  const section& require(const std::string& name) const {
    const section* s = find(name);
    if (!s) throw format_error("missing required section [" + name + "]");
    return *s;
  }
};

inline document parse(std::istream& in, const std::string& origin = "<stream>") {
  document doc;
  section* cur = &doc.top;
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string s = raw;
    if (auto hash = s.find('#'); hash != std::string::npos) s.erase(hash);
    s = trim(s);
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']')
        throw format_error(origin + ":" + std::to_string(line) + ": unterminated section header '" + raw + "'");
      std::string name = trim(std::string_view(s).substr(1, s.size() - 2));
      if (name.empty())
        throw format_error(origin + ":" + std::to_string(line) + ": empty section name");
      doc.sections.push_back(section{name, line, {}});
      cur = &doc.sections.back();
      continue;
    }
    auto eq = s.find('=');
    if (eq == std::string::npos)
      throw format_error(origin + ":" + std::to_string(line) + ": expected 'key = value', got '" + raw + "'");
    std::string key = trim(std::string_view(s).substr(0, eq));
    std::string value = trim(std::string_view(s).substr(eq + 1));
    if (key.empty())
      throw format_error(origin + ":" + std::to_string(line) + ": empty key");
    cur->entries.push_back(entry{key, value, line});
  }
  return doc;
}

inline document parse_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw format_error("cannot open '" + path + "'");
  return parse(f, path);
}

inline document parse_string(const std::string& body, const std::string& origin = "<string>") {
  std::istringstream ss(body);
  return parse(ss, origin);
}

}  // namespace vcsim::text
