#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

// Minimal CSV plumbing shared by the file readers and writers. All emitted
// files are UTF-8 with LF line endings, '.' decimal separator, and floats
// printed at 15 significant digits so reruns are byte-identical.

namespace heatseg::csv {

// Splits one CSV line. Quoted fields may contain commas and doubled quotes.
std::vector<std::string> split_line(std::string_view line);

// Quotes a field if it contains a comma, quote, or newline.
std::string escape_field(std::string_view field);

std::string join_fields(const std::vector<std::string>& fields);

// 15 significant digits, shortest form ("%.15g").
std::string format_double(double x);
std::string format_int(std::int64_t x);

std::int64_t parse_int64(std::string_view s);  // throws std::invalid_argument
double parse_double(std::string_view s);       // throws std::invalid_argument

// Reads a whole CSV file. Lines starting with '#' (schema comments) are
// skipped; the first remaining line is the header.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> row_numbers;  // 1-based line numbers in the file
};

Table read_file(const std::string& path);  // throws std::runtime_error if unreadable

// Verifies the header starts with the expected columns (extra trailing
// columns are rejected unless allow_optional covers them).
void require_header(const Table& table, const std::vector<std::string>& expected,
                    const std::string& path);

}  // namespace heatseg::csv
