#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace occtool {

// Minimal CSV handling for the plain comma-separated formats this tool emits.
// Fields are not quoted; writers reject values that would need quoting.
std::vector<std::string> split_csv_line(const std::string& line);

// Strips surrounding whitespace (and a trailing \r from CRLF files).
std::string trim(const std::string& s);

int64_t parse_int_field(const std::string& s, const std::string& what, size_t line_no);
double parse_double_field(const std::string& s, const std::string& what, size_t line_no);

// Reads non-empty lines, reporting 1-based line numbers.
struct CsvReader {
  explicit CsvReader(std::istream& in) : in_(in) {}
  bool next(std::vector<std::string>& fields, size_t& line_no);

 private:
  std::istream& in_;
  size_t line_no_ = 0;
};

}  // namespace occtool
