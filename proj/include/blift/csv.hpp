#pragma once

#include <string>
#include <vector>

namespace blift::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 when absent
};

/// Parses RFC-4180-style CSV (quoted fields, "" escapes, CRLF tolerated).
/// The first record is the header. Ragged rows are a parse error.
Table parse(const std::string& text, const std::string& what);
Table read_file(const std::string& path);

std::string escape(const std::string& field);
std::string format_double(double v);  // shortest round-trip representation

/// Writes content to path atomically (temp file + rename).
void write_file_atomic(const std::string& path, const std::string& content);

double parse_double(const std::string& field, const std::string& what);
long parse_long(const std::string& field, const std::string& what);

}  // namespace blift::csv
