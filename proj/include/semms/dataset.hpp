#ifndef SEMMS_DATASET_HPP
#define SEMMS_DATASET_HPP

#include <optional>
#include <string>
#include <vector>

#include "semms/types.hpp"

namespace semms {

/// One loaded table, immutable after construction.  `group` holds dense
/// integer codes assigned by first appearance; the original labels are
/// kept for reporting.  The group and slope columns are never part of Z.
struct Dataset {
  Vec y;
  Mat X;  // N x P fixed design; intercept-only unless the caller sets it
  Mat Z;  // N x K candidate predictors
  std::vector<int> group;                 // empty when absent
  std::vector<std::string> group_labels;  // code -> label
  Vec slope_covariate;                    // size 0 when absent
  Family family = Family::Gaussian;
  std::vector<std::string> z_names;

  int n() const { return static_cast<int>(y.size()); }
  int p() const { return static_cast<int>(X.cols()); }
  int k() const { return static_cast<int>(Z.cols()); }
  bool has_group() const { return !group.empty(); }
  bool has_slope() const { return slope_covariate.size() > 0; }
  int n_clusters() const { return group_labels.empty() ? 0 : static_cast<int>(group_labels.size()); }
};

/// Column indices are 0-based here; the CLI surface is 1-based.
/// z_cols is the inclusive range [z_first, z_last].
Dataset load_dataset(const std::string& path, int y_col, int z_first,
                     int z_last, std::optional<int> group_col,
                     std::optional<int> slope_col, Family family);

/// Centers and scales every Z column to zero mean and unit sample SD
/// (N-1 divisor).  y, X, group and the slope covariate are untouched.
/// A constant column is an error naming the column.
Dataset standardize(const Dataset& d);

/// Writes y/group/slope/Z back out in the simulate layout
/// (y, group, t, V1..VK); doubles are round-trip exact.
void write_dataset_csv(const std::string& path, const Dataset& d);

}  // namespace semms

#endif
