#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "firt/data.hpp"
#include "firt/fuzzy_number.hpp"
#include "firt/irtree.hpp"
#include "firt/tree.hpp"

namespace firt::fuzzify {

// Location and spread of a category distribution on the unit scale, with
// categories placed at knots 0, 1/(M-1), ..., 1.
struct ModePrecision {
  double c;
  double s;
};

ModePrecision mode_and_precision(std::span<const double> probs);

// mu = (1 + c s) / (2 + s).
double membership_mean(double c, double s);

struct UnitBounds {
  double l;
  double c;  // possibly nudged so that l < c < r after clipping
  double r;
  bool fallback = false;
};

// Link equations for the support on the unit scale:
//   h1 = sqrt(3.5 s - 3 (c - mu)^2), h2 = (h1 + 3c - 3mu) / 2,
//   l = c - h2, r = c - h2 + h1.
// A radicand below 1e-10 or an inverted result falls back to c -/+ 0.01.
// The support is then clipped to [0, 1], keeping c at least kMinGap inside.
UnitBounds bounds(double c, double s, double mu);

inline constexpr double kFallbackHalfWidth = 0.01;
inline constexpr double kMinGap = 1e-3;

// Intensification for one item: omega_i = F(median) - F(t_i) + 1 with F the
// right-continuous ECDF of the item's present times and a type-7 median.
// Missing times get omega = 1; fewer than two present times give all ones
// with a warning.
std::vector<double> intensification(std::span<const double> times_item);

// Removes (sets to NaN) times further than two sample standard deviations
// from the item mean. Single pass per item.
ResponseTimeMatrix trim_times(const ResponseTimeMatrix& times);

struct FuzzyDataset {
  // I x J parameter matrices on the rating scale [1, M]; NaN where the
  // rating is missing.
  Eigen::MatrixXd C;
  Eigen::MatrixXd L;
  Eigen::MatrixXd R;
  Eigen::MatrixXd W;
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> degenerate;
  // Per-rater parameterwise means over present items. Raters without any
  // present item have no composite and are listed in missing_composite.
  std::vector<Fptfn> composite;
  std::vector<int> composite_rater;  // rater index of each composite entry
  int n_fallback = 0;

  // Cell (i, j) as a fuzzy number; requires a present cell.
  Fptfn cell(int i, int j) const;
};

struct FuzzifyOptions {
  bool unit_intensification = false;  // force W = 1
};

// Runs distribution -> mode/precision -> mean -> bounds -> rescale to [1, M]
// -> intensification for every present rating. Throws InputError on
// dimension mismatch.
FuzzyDataset fuzzify_all(const irtree::IrtreeFit& fit, const TreeSpec& tree,
                         const RatingMatrix& ratings, const ResponseTimeMatrix& times,
                         const FuzzifyOptions& options = {});

// Parameterwise mean of each rater's present cells.
void build_composites(FuzzyDataset& data);

}  // namespace firt::fuzzify
