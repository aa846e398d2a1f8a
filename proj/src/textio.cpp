#include "cpsim/textio.hpp"

#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>

#include "cpsim/error.hpp"

namespace cpsim {

std::string exact(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

std::string number(double value, int significant) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*g", significant, value);
  return buf;
}

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = text.find(sep, start);
    out.emplace_back(text.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string trim(std::string_view text) {
  const auto b = text.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = text.find_last_not_of(" \t\r\n");
  return std::string(text.substr(b, e - b + 1));
}

double parse_double(std::string_view text, const std::string& field) {
  const std::string s = trim(text);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw Error(ErrorCode::kParse, field + ": not a number: '" + s + "'", field);
  }
  return value;
}

long long parse_int(std::string_view text, const std::string& field) {
  const std::string s = trim(text);
  long long value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw Error(ErrorCode::kParse, field + ": not an integer: '" + s + "'", field);
  }
  return value;
}

std::size_t CsvTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw Error(ErrorCode::kParse, "missing CSV column '" + std::string(name) + "'",
              std::string(name));
}

namespace {
void write_row(std::ostream& out, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out << ',';
    out << cells[i];
  }
  out << '\n';
}
}  // namespace

void CsvTable::write(std::ostream& out) const {
  write_row(out, header);
  for (const auto& r : rows) write_row(out, r);
}

CsvTable CsvTable::read(std::istream& in) {
  CsvTable table;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split(line, ',');
    if (first) {
      table.header = std::move(cells);
      first = false;
    } else {
      if (cells.size() != table.header.size()) {
        throw Error(ErrorCode::kParse, "CSV row has " + std::to_string(cells.size()) +
                                           " cells, header has " +
                                           std::to_string(table.header.size()));
      }
      table.rows.push_back(std::move(cells));
    }
  }
  if (first) throw Error(ErrorCode::kParse, "empty CSV input");
  return table;
}

}  // namespace cpsim
