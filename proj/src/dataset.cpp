#include "semms/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "semms/csv.hpp"

namespace semms {

std::string family_name(Family f) {
  switch (f) {
    case Family::Gaussian: return "gaussian";
    case Family::Poisson: return "poisson";
    case Family::Binomial: return "binomial";
  }
  return "?";
}

Family family_from_name(const std::string& name) {
  if (name == "gaussian" || name == "N") return Family::Gaussian;
  if (name == "poisson" || name == "P") return Family::Poisson;
  if (name == "binomial" || name == "B") return Family::Binomial;
  throw std::invalid_argument("unknown family: " + name);
}

Dataset load_dataset(const std::string& path, int y_col, int z_first,
                     int z_last, std::optional<int> group_col,
                     std::optional<int> slope_col, Family family) {
  const CsvTable table = read_csv(path);
  const int n_cols = table.n_cols();
  const int n = table.n_rows();
  if (n == 0) throw std::invalid_argument("no data rows in " + path);
  if (z_first > z_last) throw std::invalid_argument("empty z_cols range");

  auto in_range = [&](int c, const char* what) {
    if (c < 0 || c >= n_cols) {
      throw std::invalid_argument(std::string(what) + " column index " +
                                  std::to_string(c + 1) + " out of range (file has " +
                                  std::to_string(n_cols) + " columns)");
    }
  };
  in_range(y_col, "y");
  in_range(z_first, "z");
  in_range(z_last, "z");
  if (group_col) in_range(*group_col, "group");
  if (slope_col) in_range(*slope_col, "slope");

  // Disjointness: collect overlaps and report them 1-based.
  std::vector<int> overlap;
  auto check = [&](std::optional<int> c) {
    if (!c) return;
    if (*c == y_col || (*c >= z_first && *c <= z_last)) overlap.push_back(*c);
  };
  if (y_col >= z_first && y_col <= z_last) overlap.push_back(y_col);
  check(group_col);
  check(slope_col);
  if (group_col && slope_col && *group_col == *slope_col)
    overlap.push_back(*group_col);
  if (!overlap.empty()) {
    std::sort(overlap.begin(), overlap.end());
    overlap.erase(std::unique(overlap.begin(), overlap.end()), overlap.end());
    std::ostringstream msg;
    msg << "overlapping column indices:";
    for (int c : overlap) msg << ' ' << (c + 1);
    throw std::invalid_argument(msg.str());
  }

  Dataset d;
  d.family = family;
  const int k = z_last - z_first + 1;
  d.y.resize(n);
  d.Z.resize(n, k);
  d.X = Mat::Ones(n, 1);
  if (slope_col) d.slope_covariate.resize(n);

  std::map<std::string, int> label_to_code;
  if (group_col) d.group.resize(n);

  for (int r = 0; r < n; ++r) {
    const auto& row = table.rows[r];
    d.y(r) = parse_cell(row[y_col], r + 1, y_col + 1);
    for (int j = 0; j < k; ++j)
      d.Z(r, j) = parse_cell(row[z_first + j], r + 1, z_first + j + 1);
    if (slope_col)
      d.slope_covariate(r) = parse_cell(row[*slope_col], r + 1, *slope_col + 1);
    if (group_col) {
      const std::string& label = row[*group_col];
      auto [it, inserted] =
          label_to_code.try_emplace(label, static_cast<int>(d.group_labels.size()));
      if (inserted) d.group_labels.push_back(label);
      d.group[r] = it->second;
    }
  }

  if (family == Family::Binomial) {
    for (int r = 0; r < n; ++r) {
      if (d.y(r) != 0.0 && d.y(r) != 1.0) {
        throw std::invalid_argument("binomial response outside {0,1} at row " +
                                    std::to_string(r + 1));
      }
    }
  }
  if (family == Family::Poisson) {
    for (int r = 0; r < n; ++r) {
      if (d.y(r) < 0.0 || d.y(r) != std::floor(d.y(r))) {
        throw std::invalid_argument(
            "poisson response must be a non-negative integer, got " +
            format_double(d.y(r)) + " at row " + std::to_string(r + 1));
      }
    }
  }

  for (int j = 0; j < k; ++j) {
    d.z_names.push_back(table.header[z_first + j]);
  }
  return d;
}

Dataset standardize(const Dataset& d) {
  Dataset out = d;
  const int n = d.n();
  if (n < 2) throw std::invalid_argument("need at least 2 rows to standardize");
  for (int j = 0; j < d.k(); ++j) {
    const double mean = d.Z.col(j).mean();
    const double ss = (d.Z.col(j).array() - mean).square().sum();
    const double sd = std::sqrt(ss / (n - 1));
    if (sd == 0.0) {
      const std::string name =
          j < static_cast<int>(d.z_names.size()) ? d.z_names[j] : std::to_string(j + 1);
      throw std::invalid_argument("constant candidate column: " + name);
    }
    out.Z.col(j) = (d.Z.col(j).array() - mean) / sd;
  }
  return out;
}

void write_dataset_csv(const std::string& path, const Dataset& d) {
  CsvTable table;
  table.header.push_back("y");
  if (d.has_group()) table.header.push_back("group");
  if (d.has_slope()) table.header.push_back("t");
  for (int j = 0; j < d.k(); ++j) {
    table.header.push_back(j < static_cast<int>(d.z_names.size())
                               ? d.z_names[j]
                               : "V" + std::to_string(j + 1));
  }
  table.rows.reserve(d.n());
  for (int r = 0; r < d.n(); ++r) {
    std::vector<std::string> row;
    row.reserve(table.header.size());
    if (d.family == Family::Gaussian) {
      row.push_back(format_double(d.y(r)));
    } else {
      row.push_back(std::to_string(static_cast<long>(d.y(r))));
    }
    if (d.has_group()) row.push_back(d.group_labels[d.group[r]]);
    if (d.has_slope()) row.push_back(format_double(d.slope_covariate(r)));
    for (int j = 0; j < d.k(); ++j) row.push_back(format_double(d.Z(r, j)));
    table.rows.push_back(std::move(row));
  }
  write_csv(path, table);
}

}  // namespace semms
