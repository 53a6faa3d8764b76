#include "heatseg/csv.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <stdexcept>

namespace heatseg::csv {

std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool in_quotes = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

std::string escape_field(std::string_view field) {
  bool needs_quotes = false;
  for (char c : field) {
    if (c == ',' || c == '"' || c == '\n' || c == '\r') {
      needs_quotes = true;
      break;
    }
  }
  if (!needs_quotes) return std::string(field);
  std::string out;
  out.reserve(field.size() + 2);
  out.push_back('"');
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string join_fields(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out.push_back(',');
    out += escape_field(fields[i]);
  }
  return out;
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.15g", x);
  return buf;
}

std::string format_int(std::int64_t x) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%lld", static_cast<long long>(x));
  return buf;
}

std::int64_t parse_int64(std::string_view s) {
  if (s.empty()) throw std::invalid_argument("empty integer field");
  std::string tmp(s);
  errno = 0;
  char* end = nullptr;
  long long v = std::strtoll(tmp.c_str(), &end, 10);
  if (errno == ERANGE || end != tmp.c_str() + tmp.size())
    throw std::invalid_argument("bad integer '" + tmp + "'");
  return v;
}

double parse_double(std::string_view s) {
  if (s.empty()) throw std::invalid_argument("empty numeric field");
  std::string tmp(s);
  errno = 0;
  char* end = nullptr;
  double v = std::strtod(tmp.c_str(), &end);
  if (errno == ERANGE || end != tmp.c_str() + tmp.size())
    throw std::invalid_argument("bad number '" + tmp + "'");
  return v;
}

Table read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  Table table;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') continue;
    if (!have_header) {
      table.header = split_line(line);
      have_header = true;
    } else {
      table.rows.push_back(split_line(line));
      table.row_numbers.push_back(lineno);
    }
  }
  if (!have_header) throw std::runtime_error(path + ": empty file, no header");
  return table;
}

void require_header(const Table& table, const std::vector<std::string>& expected,
                    const std::string& path) {
  if (table.header.size() != expected.size()) {
    throw std::runtime_error(path + ": expected " + std::to_string(expected.size()) +
                             " columns, found " + std::to_string(table.header.size()));
  }
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (table.header[i] != expected[i])
      throw std::runtime_error(path + ": column " + std::to_string(i + 1) + " is '" +
                               table.header[i] + "', expected '" + expected[i] + "'");
  }
}

}  // namespace heatseg::csv
