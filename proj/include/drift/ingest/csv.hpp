#pragma once

#include <cctype>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "drift/common.hpp"

namespace drift::ingest {

/// Minimal reader for the plain comma-separated files used by the ingest
/// formats (no quoting; fields are dates and numbers).
struct CsvRow {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

inline std::vector<std::string> split_fields(std::string_view line, char sep = ',') {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    auto field = line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) {
      field.remove_suffix(1);
    }
    out.emplace_back(field);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

/// Reads all non-blank, non-comment lines. A first row whose leading field is
/// not a date/number is treated as a header and returned separately.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<CsvRow> rows;
};

inline bool looks_numeric_or_date(std::string_view s) {
  return !s.empty() && (std::isdigit(static_cast<unsigned char>(s.front())) || s.front() == '-' ||
                        s.front() == '+' || s.front() == '.');
}

inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  CsvTable table;
  std::string line;
  std::size_t lineno = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos || line.front() == '#') continue;
    auto fields = split_fields(line);
    if (first && !looks_numeric_or_date(fields.front())) {
      table.header = std::move(fields);
      first = false;
      continue;
    }
    first = false;
    table.rows.push_back({lineno, std::move(fields)});
  }
  return table;
}

inline double parse_double(std::string_view s, const std::filesystem::path& path, std::size_t line) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (s.empty() || ec != std::errc{} || ptr != end || !std::isfinite(v)) {
    throw Error(path.string() + ":" + std::to_string(line) + ": non-numeric value '" + std::string(s) + "'");
  }
  return v;
}

inline long long parse_int(std::string_view s, const std::filesystem::path& path, std::size_t line) {
  long long v = 0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (s.empty() || ec != std::errc{} || ptr != end) {
    throw Error(path.string() + ":" + std::to_string(line) + ": non-integer value '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace drift::ingest
