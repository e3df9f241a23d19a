#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "firt/fuzzy_number.hpp"

namespace firt::regress {

// Crisp predictor column as read from the covariate file.
struct Covariate {
  enum class Kind { kNumeric, kCategorical };
  std::string name;
  Kind kind = Kind::kNumeric;
  std::vector<double> numeric;      // kNumeric
  std::vector<std::string> values;  // kCategorical, one level per row
  std::vector<std::string> levels;  // declared level order
  std::string reference;            // reference level for dummy coding
};

struct DummyCoding {
  std::string covariate;
  std::string reference;
  std::vector<std::string> levels;  // non-reference levels, one column each
  std::vector<int> columns;         // design column of each level
};

// n x p design with a leading intercept column.
struct DesignMatrix {
  Eigen::MatrixXd X;
  std::vector<std::string> labels;
  std::vector<DummyCoding> coding;
  std::vector<int> numeric_columns;  // design column of each numeric covariate

  int rows() const { return static_cast<int>(X.rows()); }
  int cols() const { return static_cast<int>(X.cols()); }
};

// Intercept, then covariates in order: numeric columns as-is, categorical ones
// dummy coded against their reference level. Throws InputError on unknown
// levels or ragged columns.
DesignMatrix make_design(const std::vector<Covariate>& covariates);

// Keeps only the listed rows.
DesignMatrix select_rows(const DesignMatrix& design, std::span<const int> rows);

enum class ModelKind { kNormal, kLogNormal, kFuzzyNormal };
const char* to_string(ModelKind kind);

struct RegressionFit {
  ModelKind kind = ModelKind::kNormal;
  std::vector<std::string> labels;
  Eigen::VectorXd beta;
  Eigen::VectorXd se;
  Eigen::MatrixXd ci;  // p x 2, columns lower / upper
  double alpha_level = 0.05;
  double sigma2 = 0.0;
  double log_likelihood = 0.0;       // for the fuzzy model: minus the total inaccuracy
  double null_log_likelihood = 0.0;  // intercept-only model of the same kind
  double pseudo_r2 = 0.0;
  std::array<double, 3> residual_quartiles{};
  double objective_at_optimum = 0.0;
  int n = 0;
  bool converged = true;
  // Log-normal only: multiplicative effects exp(beta) and exp(se).
  Eigen::VectorXd exp_beta;
  Eigen::VectorXd exp_se;

  double predict(std::span<const double> x) const;
};

// Maximum likelihood normal linear model: least-squares beta, sigma2 = RSS/n,
// Wald intervals beta -/+ z se with se from sigma2 (X'X)^-1. Throws InputError
// if n <= p or X is rank deficient (the message names the collinear columns).
RegressionFit fit_normal(std::span<const double> y, const DesignMatrix& design,
                         double alpha_level = 0.05);

// fit_normal on log(t). Throws InputError for non-positive times.
RegressionFit fit_lognormal(std::span<const double> t, const DesignMatrix& design,
                            double alpha_level = 0.05);

enum class FuzzyMethod { kClosedForm, kNumeric };

// Minimum-inaccuracy fit of a normal linear model to fuzzy responses. The
// total inaccuracy is
//   I(beta, sigma2) = sum_i  integral xi*_i(y) (-log phi(y; x_i beta, sigma2)) dy
// with xi*_i the membership of observation i normalised to unit mass.
// kClosedForm uses the membership means and variances; kNumeric minimises the
// quadrature-evaluated objective over (beta, log sigma2) with L-BFGS and falls
// back to the closed form (converged = false) if it does not converge.
RegressionFit fit_fuzzy_normal(std::span<const Fptfn> ydata, const DesignMatrix& design,
                               double alpha_level = 0.05,
                               FuzzyMethod method = FuzzyMethod::kClosedForm);

// Total inaccuracy at (beta, sigma2) evaluated by quadrature, and its gradient
// with respect to (beta, log sigma2) when grad is non-null.
double fuzzy_inaccuracy(std::span<const Fptfn> ydata, const DesignMatrix& design,
                        const Eigen::VectorXd& beta, double log_sigma2,
                        Eigen::VectorXd* grad = nullptr);

// 1 - exp(-(2/n)(ll_full - ll_null)), clipped to [0, 1]. Throws InputError if
// the fits differ in kind or sample size.
double pseudo_r2(const RegressionFit& full, const RegressionFit& null);

// (J/(J-1)) (1 - sum_j var_j / var_total) with n-1 denominators. Throws
// InputError for fewer than two items or NaN entries, UndefinedError for zero
// total variance.
double cronbach_alpha(const Eigen::MatrixXd& items);

// alpha * rowsum_i + (1 - alpha) * mean(rowsums).
Eigen::VectorXd alpha_composite(const Eigen::MatrixXd& items, double alpha);

}  // namespace firt::regress
