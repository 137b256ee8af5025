#include "semms/csv.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace semms {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream stream(line);
  while (std::getline(stream, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open file: " + path);

  CsvTable table;
  std::string line;
  if (!std::getline(in, line))
    throw std::invalid_argument("empty file (header row required): " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  table.header = split_line(line);

  int row_no = 1;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_line(line);
    if (cells.size() != table.header.size()) {
      throw std::invalid_argument(
          "row " + std::to_string(row_no) + " has " +
          std::to_string(cells.size()) + " cells, expected " +
          std::to_string(table.header.size()) + ": " + path);
    }
    table.rows.push_back(std::move(cells));
    ++row_no;
  }
  return table;
}

double parse_cell(const std::string& cell, int row, int col) {
  if (cell.empty()) {
    throw std::invalid_argument("missing value at row " + std::to_string(row) +
                                ", column " + std::to_string(col));
  }
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  while (first != last && (*first == ' ' || *first == '\t')) ++first;
  while (last != first && (*(last - 1) == ' ' || *(last - 1) == '\t')) --last;
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) {
    throw std::invalid_argument("non-numeric cell \"" + cell + "\" at row " +
                                std::to_string(row) + ", column " +
                                std::to_string(col));
  }
  return value;
}

std::string format_double(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

void write_csv(const std::string& path, const CsvTable& table) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write file: " + path);
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (c) out << ',';
    out << table.header[c];
  }
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out << ',';
      out << row[c];
    }
    out << '\n';
  }
}

}  // namespace semms
