#include "occtool/csv.hpp"

#include <cctype>
#include <cstdlib>
#include <istream>

#include "occtool/errors.hpp"

namespace occtool {

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

int64_t parse_int_field(const std::string& s, const std::string& what, size_t line_no) {
  char* end = nullptr;
  const std::string t = trim(s);
  long long v = std::strtoll(t.c_str(), &end, 10);
  if (t.empty() || end == t.c_str() || *end != '\0')
    throw InputError("line " + std::to_string(line_no) + ": invalid integer for " + what +
                     ": '" + s + "'");
  return v;
}

double parse_double_field(const std::string& s, const std::string& what, size_t line_no) {
  char* end = nullptr;
  const std::string t = trim(s);
  double v = std::strtod(t.c_str(), &end);
  if (t.empty() || end == t.c_str() || *end != '\0')
    throw InputError("line " + std::to_string(line_no) + ": invalid number for " + what +
                     ": '" + s + "'");
  return v;
}

bool CsvReader::next(std::vector<std::string>& fields, size_t& line_no) {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_no_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    fields = split_csv_line(line);
    line_no = line_no_;
    return true;
  }
  return false;
}

}  // namespace occtool
