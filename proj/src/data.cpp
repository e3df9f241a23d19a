#include "firt/data.hpp"

#include <string>

#include "firt/diagnostics.hpp"

namespace firt {

void RatingMatrix::validate(int n_categories) const {
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      const int v = values(i, j);
      if (v != kMissing && (v < 1 || v > n_categories)) {
        throw InputError("rating " + std::to_string(v) + " at (" + std::to_string(i + 1) + ", " +
                         std::to_string(j + 1) + ") outside 1.." + std::to_string(n_categories));
      }
    }
  }
}

void ResponseTimeMatrix::validate() const {
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      const double v = values(i, j);
      if (!std::isnan(v) && !(std::isfinite(v) && v > 0.0)) {
        throw InputError("response time at (" + std::to_string(i + 1) + ", " +
                         std::to_string(j + 1) + ") must be positive");
      }
    }
  }
}

}  // namespace firt
