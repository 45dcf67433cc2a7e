#include "blift/csv.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "blift/common.hpp"

namespace blift::csv {

int Table::column(const std::string& name) const {
  for (size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

namespace {

std::vector<std::string> split_record(const std::string& text, size_t& pos,
                                      const std::string& what) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  const size_t n = text.size();
  while (pos < n) {
    char c = text[pos];
    if (quoted) {
      if (c == '"') {
        if (pos + 1 < n && text[pos + 1] == '"') {
          field.push_back('"');
          pos += 2;
        } else {
          quoted = false;
          ++pos;
        }
      } else {
        field.push_back(c);
        ++pos;
      }
      continue;
    }
    if (c == '"') {
      if (!field.empty())
        fail(ErrorCode::Parse, what + ": stray quote inside unquoted field");
      quoted = true;
      ++pos;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
      ++pos;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && pos + 1 < n && text[pos + 1] == '\n') ++pos;
      ++pos;
      fields.push_back(std::move(field));
      return fields;
    } else {
      field.push_back(c);
      ++pos;
    }
  }
  if (quoted) fail(ErrorCode::Parse, what + ": unterminated quoted field");
  fields.push_back(std::move(field));
  return fields;
}

}  // namespace

Table parse(const std::string& text, const std::string& what) {
  Table t;
  size_t pos = 0;
  bool first = true;
  while (pos < text.size()) {
    // Skip blank lines between records.
    if (text[pos] == '\n' || text[pos] == '\r') {
      ++pos;
      continue;
    }
    auto fields = split_record(text, pos, what);
    if (first) {
      t.header = std::move(fields);
      first = false;
    } else {
      if (fields.size() != t.header.size()) {
        fail(ErrorCode::Parse,
             what + ": row " + std::to_string(t.rows.size() + 2) + " has " +
                 std::to_string(fields.size()) + " fields, header has " +
                 std::to_string(t.header.size()));
      }
      t.rows.push_back(std::move(fields));
    }
  }
  if (first) fail(ErrorCode::Parse, what + ": empty input");
  return t;
}

Table read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

std::string escape(const std::string& field) {
  bool needs = field.find_first_of(",\"\n\r") != std::string::npos;
  if (!needs) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_file_atomic(const std::string& path, const std::string& content) {
  std::filesystem::path target(path);
  if (target.has_parent_path())
    std::filesystem::create_directories(target.parent_path());
  std::filesystem::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::Io, "cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) fail(ErrorCode::Io, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, target);
}

double parse_double(const std::string& field, const std::string& what) {
  double v = 0;
  auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc{} || res.ptr != field.data() + field.size())
    fail(ErrorCode::Parse, what + ": not a number: '" + field + "'");
  return v;
}

long parse_long(const std::string& field, const std::string& what) {
  long v = 0;
  auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc{} || res.ptr != field.data() + field.size())
    fail(ErrorCode::Parse, what + ": not an integer: '" + field + "'");
  return v;
}

}  // namespace blift::csv
