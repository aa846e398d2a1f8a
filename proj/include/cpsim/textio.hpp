#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace cpsim {

// Shortest "%.17g"-style text that round-trips the double exactly.
std::string exact(double value);

// Fixed-width general format used for CSV metric columns.
std::string number(double value, int significant = 10);

std::vector<std::string> split(std::string_view text, char sep);
std::string trim(std::string_view text);
double parse_double(std::string_view text, const std::string& field);
long long parse_int(std::string_view text, const std::string& field);

// Minimal CSV table: header plus string cells, LF line endings.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const;  // throws kParse if absent
  void write(std::ostream& out) const;
  static CsvTable read(std::istream& in);
};

}  // namespace cpsim
