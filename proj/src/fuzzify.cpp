#include "firt/fuzzify.hpp"

#include <algorithm>
#include <cmath>

#include "firt/diagnostics.hpp"
#include "firt/stats.hpp"

namespace firt::fuzzify {

ModePrecision mode_and_precision(std::span<const double> probs) {
  const auto m = probs.size();
  if (m < 2) throw InputError("category distribution needs at least two categories");
  const double step = 1.0 / static_cast<double>(m - 1);
  double c = 0.0;
  for (std::size_t k = 0; k < m; ++k) c += static_cast<double>(k) * step * probs[k];
  double s = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    const double d = static_cast<double>(k) * step - c;
    s += d * d * probs[k];
  }
  return {c, s};
}

double membership_mean(double c, double s) { return (1.0 + c * s) / (2.0 + s); }

UnitBounds bounds(double c, double s, double mu) {
  UnitBounds b{0.0, c, 0.0, false};
  const double radicand = 3.5 * s - 3.0 * (c - mu) * (c - mu);
  if (radicand >= 1e-10) {
    const double h1 = std::sqrt(radicand);
    const double h2 = 0.5 * (h1 + 3.0 * c - 3.0 * mu);
    b.l = c - h2;
    b.r = c - h2 + h1;
  }
  if (radicand < 1e-10 || !(b.l <= c && c <= b.r)) {
    b.fallback = true;
    b.l = c - kFallbackHalfWidth;
    b.r = c + kFallbackHalfWidth;
  }
  b.l = std::max(b.l, 0.0);
  b.r = std::min(b.r, 1.0);
  if (b.r - b.l < 2.0 * kMinGap) {
    // Support collapsed against a boundary: re-open it inward.
    if (b.l <= 0.0) {
      b.r = std::max(b.r, 2.0 * kMinGap);
    } else {
      b.l = std::min(b.l, 1.0 - 2.0 * kMinGap);
    }
  }
  b.c = std::clamp(c, b.l + kMinGap, b.r - kMinGap);
  return b;
}

std::vector<double> intensification(std::span<const double> times_item) {
  std::vector<double> present;
  for (double t : times_item) {
    if (!std::isnan(t)) present.push_back(t);
  }
  std::vector<double> omega(times_item.size(), 1.0);
  if (present.size() < 2) {
    warn("fewer than two response times for an item; intensification set to 1");
    return omega;
  }
  const stats::Ecdf ecdf(present);
  const double f_median = ecdf(stats::median(present));
  for (std::size_t k = 0; k < times_item.size(); ++k) {
    if (!std::isnan(times_item[k])) omega[k] = f_median - ecdf(times_item[k]) + 1.0;
  }
  return omega;
}

ResponseTimeMatrix trim_times(const ResponseTimeMatrix& times) {
  ResponseTimeMatrix out = times;
  for (int j = 0; j < times.n_items(); ++j) {
    std::vector<double> present;
    for (int i = 0; i < times.n_raters(); ++i) {
      if (!times.missing(i, j)) present.push_back(times.values(i, j));
    }
    if (present.size() < 2) continue;
    const double m = stats::mean(present);
    const double sd = stats::sample_sd(present);
    for (int i = 0; i < times.n_raters(); ++i) {
      if (!times.missing(i, j) && std::abs(times.values(i, j) - m) > 2.0 * sd) {
        out.values(i, j) = ResponseTimeMatrix::missing_value();
      }
    }
  }
  return out;
}

Fptfn FuzzyDataset::cell(int i, int j) const {
  if (std::isnan(C(i, j))) throw InputError("fuzzy cell requested for a missing rating");
  return Fptfn(L(i, j), C(i, j), R(i, j), W(i, j));
}

void build_composites(FuzzyDataset& data) {
  data.composite.clear();
  data.composite_rater.clear();
  for (Eigen::Index i = 0; i < data.C.rows(); ++i) {
    double l = 0.0, c = 0.0, r = 0.0, w = 0.0;
    int k = 0;
    for (Eigen::Index j = 0; j < data.C.cols(); ++j) {
      if (std::isnan(data.C(i, j))) continue;
      // Running means: exact when all cells agree.
      ++k;
      l += (data.L(i, j) - l) / k;
      c += (data.C(i, j) - c) / k;
      r += (data.R(i, j) - r) / k;
      w += (data.W(i, j) - w) / k;
    }
    if (k == 0) continue;
    data.composite.emplace_back(l, c, r, w);
    data.composite_rater.push_back(static_cast<int>(i));
  }
}

FuzzyDataset fuzzify_all(const irtree::IrtreeFit& fit, const TreeSpec& tree,
                         const RatingMatrix& ratings, const ResponseTimeMatrix& times,
                         const FuzzifyOptions& options) {
  const int n_raters = ratings.n_raters();
  const int n_items = ratings.n_items();
  if (times.n_raters() != n_raters || times.n_items() != n_items) {
    throw InputError("ratings and response times have different dimensions");
  }
  if (fit.eta_hat.rows() != n_raters || fit.alpha.rows() != n_items ||
      fit.alpha.cols() != tree.n_nodes() || fit.eta_hat.cols() != tree.n_nodes()) {
    throw InputError("IRTree fit does not match the ratings or tree dimensions");
  }
  ratings.validate(tree.n_categories());

  const double nan = std::numeric_limits<double>::quiet_NaN();
  FuzzyDataset out;
  out.C = Eigen::MatrixXd::Constant(n_raters, n_items, nan);
  out.L = out.C;
  out.R = out.C;
  out.W = out.C;
  out.degenerate.setConstant(n_raters, n_items, false);

  const double scale = static_cast<double>(tree.n_categories() - 1);
  for (int j = 0; j < n_items; ++j) {
    std::vector<double> item_times(static_cast<std::size_t>(n_raters));
    for (int i = 0; i < n_raters; ++i) item_times[static_cast<std::size_t>(i)] = times.values(i, j);
    const auto omega = options.unit_intensification
                           ? std::vector<double>(static_cast<std::size_t>(n_raters), 1.0)
                           : intensification(item_times);
    const Eigen::VectorXd alpha_j = fit.alpha.row(j).transpose();
    for (int i = 0; i < n_raters; ++i) {
      if (ratings.missing(i, j)) continue;
      const Eigen::VectorXd eta_i = fit.eta_hat.row(i).transpose();
      const Eigen::VectorXd probs = irtree::category_distribution(tree, eta_i, alpha_j);
      const auto [c, s] = mode_and_precision(std::span<const double>(probs.data(), probs.size()));
      const double mu = membership_mean(c, s);
      const auto b = bounds(c, s, mu);
      if (b.fallback) ++out.n_fallback;
      const Fptfn unit(b.l, b.c, b.r, omega[static_cast<std::size_t>(i)]);
      const Fptfn scaled = scale_affine(unit, 1.0, scale);
      out.L(i, j) = scaled.l();
      out.C(i, j) = scaled.c();
      out.R(i, j) = scaled.r();
      out.W(i, j) = scaled.omega();
      out.degenerate(i, j) = scaled.degenerate();
    }
  }
  build_composites(out);
  return out;
}

}  // namespace firt::fuzzify
