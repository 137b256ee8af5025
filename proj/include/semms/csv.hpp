#ifndef SEMMS_CSV_HPP
#define SEMMS_CSV_HPP

#include <string>
#include <vector>

namespace semms {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int n_rows() const { return static_cast<int>(rows.size()); }
  int n_cols() const { return static_cast<int>(header.size()); }
};

/// Reads a comma-delimited file with a mandatory header row.  Every row
/// must have the same number of cells as the header; a short or long row
/// is a hard error.
CsvTable read_csv(const std::string& path);

/// Parses one cell as a double.  `row` and `col` are 1-based coordinates
/// (header = row 0) used in the error message.
double parse_cell(const std::string& cell, int row, int col);

/// Formats a double with enough digits to round-trip bit-exactly.
std::string format_double(double value);

void write_csv(const std::string& path, const CsvTable& table);

}  // namespace semms

#endif
