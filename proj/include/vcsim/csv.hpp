#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "vcsim/common.hpp"
#include "vcsim/textconfig.hpp"

namespace vcsim::csv {

struct table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    throw format_error("csv column '" + name + "' not found");
  }
};

inline table read(std::istream& in, const std::string& origin = "<csv>") {
  table t;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string s = text::trim(line);
    if (s.empty()) continue;
    auto cells = text::split(s, ',');
    if (t.header.empty()) {
      t.header = cells;
      continue;
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells)
      row.push_back(text::parse_num(c, origin + ":" + std::to_string(lineno)));
    if (row.size() != t.header.size())
      throw format_error(origin + ":" + std::to_string(lineno) + ": expected " +
                         std::to_string(t.header.size()) + " cells, got " + std::to_string(row.size()));
    t.rows.push_back(std::move(row));
  }
  if (t.header.empty()) throw format_error(origin + ": empty csv");
  return t;
}

inline table read_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw format_error("cannot open '" + path + "'");
  return read(f, path);
}

// Fixed "%.*g" formatting keeps byte-identical output across runs.
inline std::string format_num(double v, int digits = 12) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
  return buf;
}

inline void write(std::ostream& out, const table& t, int digits = 12) {
  for (std::size_t i = 0; i < t.header.size(); ++i)
    out << (i ? "," : "") << t.header[i];
  out << "\n";
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i)
      out << (i ? "," : "") << format_num(row[i], digits);
    out << "\n";
  }
}

inline void write_file(const std::string& path, const table& t, int digits = 12) {
  std::ofstream f(path, std::ios::binary);  // binary: no CRLF translation
  if (!f) throw format_error("cannot open '" + path + "' for writing");
  write(f, t, digits);
}

}  // namespace vcsim::csv
