#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "longwave/errors.hpp"

namespace longwave {

/// Shortest round-trip decimal form; byte-stable across runs.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

/// Parse a comma-delimited numeric CSV with a mandatory header row.
/// Reports 1-based row/column positions on failure.
inline CsvTable read_csv(std::istream& in, const std::string& name) {
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw DataError(name + ": empty file, header required");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) table.header.push_back(cell);
  }
  if (table.header.empty()) throw DataError(name + ": header row has no columns");
  std::size_t rowno = 1;
  while (std::getline(in, line)) {
    ++rowno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::size_t col = 0, pos = 0;
    while (pos <= line.size()) {
      std::size_t comma = line.find(',', pos);
      if (comma == std::string::npos) comma = line.size();
      ++col;
      const std::string_view cell(line.data() + pos, comma - pos);
      double v = 0.0;
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size())
        throw DataError(name + ": row " + std::to_string(rowno) + ", column " +
                        std::to_string(col) + ": cannot parse '" +
                        std::string(cell) + "' as a number");
      row.push_back(v);
      pos = comma + 1;
      if (comma == line.size()) break;
    }
    if (row.size() != table.header.size())
      throw DataError(name + ": row " + std::to_string(rowno) + " has " +
                      std::to_string(row.size()) + " fields, expected " +
                      std::to_string(table.header.size()));
    table.rows.push_back(std::move(row));
  }
  return table;
}

inline CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "' for reading");
  return read_csv(in, path);
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw DataError("failed writing '" + path + "'");
}

/// FNV-1a 64-bit, used for config provenance hashes.
inline std::string fnv1a_hex(std::string_view s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  static const char* digits = "0123456789abcdef";
  for (int i = 15; i >= 0; --i) {
    buf[i] = digits[h & 0xf];
    h >>= 4;
  }
  buf[16] = '\0';
  return std::string(buf);
}

}  // namespace longwave
