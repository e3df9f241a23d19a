#pragma once

#include <cmath>
#include <limits>

#include <Eigen/Dense>

namespace firt {

// I x J crisp ratings coded 1..M; kMissing marks an absent response.
struct RatingMatrix {
  static constexpr int kMissing = 0;
  Eigen::MatrixXi values;

  int n_raters() const { return static_cast<int>(values.rows()); }
  int n_items() const { return static_cast<int>(values.cols()); }
  bool missing(int i, int j) const { return values(i, j) == kMissing; }

  // Throws InputError if any present entry lies outside 1..n_categories.
  void validate(int n_categories) const;
};

// I x J response times in milliseconds; NaN marks an absent value.
struct ResponseTimeMatrix {
  Eigen::MatrixXd values;

  static double missing_value() { return std::numeric_limits<double>::quiet_NaN(); }
  int n_raters() const { return static_cast<int>(values.rows()); }
  int n_items() const { return static_cast<int>(values.cols()); }
  bool missing(int i, int j) const { return std::isnan(values(i, j)); }

  // Throws InputError if any present entry is not a positive finite number.
  void validate() const;
};

}  // namespace firt
