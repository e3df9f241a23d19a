#include "firt/regress.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "firt/diagnostics.hpp"
#include "firt/optim.hpp"
#include "firt/quadrature.hpp"
#include "firt/stats.hpp"

namespace firt::regress {
namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

Eigen::VectorXd to_vector(std::span<const double> v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

double normal_log_likelihood(int n, double sigma2) {
  if (sigma2 <= 0.0) return std::numeric_limits<double>::infinity();
  return -0.5 * n * (kLog2Pi + std::log(sigma2) + 1.0);
}

void check_design(const DesignMatrix& design, Eigen::Index n_obs) {
  const auto& X = design.X;
  if (X.rows() != n_obs) throw InputError("response length does not match the design rows");
  if (X.cols() < 1 || !(X.col(0).array() == 1.0).all()) {
    throw InputError("design matrix must start with an intercept column of ones");
  }
  if (X.rows() <= X.cols()) {
    throw InputError("need more observations (" + std::to_string(X.rows()) +
                     ") than coefficients (" + std::to_string(X.cols()) + ")");
  }
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < X.cols()) {
    std::string names;
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index k = qr.rank(); k < X.cols(); ++k) {
      const auto col = static_cast<std::size_t>(perm[k]);
      if (!names.empty()) names += ", ";
      names += col < design.labels.size() ? design.labels[col] : std::to_string(col);
    }
    throw InputError("design matrix is rank deficient; collinear column(s): " + names);
  }
}

Eigen::VectorXd least_squares(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  return X.colPivHouseholderQr().solve(y);
}

void fill_intervals(RegressionFit& fit) {
  const double z = stats::normal_quantile(1.0 - fit.alpha_level / 2.0);
  fit.ci.resize(fit.beta.size(), 2);
  fit.ci.col(0) = fit.beta - z * fit.se;
  fit.ci.col(1) = fit.beta + z * fit.se;
}

std::array<double, 3> residual_quartiles(const Eigen::VectorXd& resid) {
  return stats::quartiles(std::span<const double>(resid.data(), static_cast<std::size_t>(resid.size())));
}

// Per-observation quadrature nodes and weights of the standardized membership.
struct WeightedNodes {
  std::vector<double> y;
  std::vector<double> w;
};

WeightedNodes standardized_nodes(const Fptfn& f) {
  WeightedNodes out;
  if (f.degenerate()) {
    out.y.push_back(f.c());
    out.w.push_back(1.0);
    return out;
  }
  const auto& gl = GaussLegendre::order64();
  double mass = 0.0;
  for (const auto& [a, b] : {std::pair{f.l(), f.c()}, std::pair{f.c(), f.r()}}) {
    gl.for_each_graded(
        [&](double y, double qw) {
          const double w = qw * membership(f, y);
          out.y.push_back(y);
          out.w.push_back(w);
          mass += w;
        },
        a, b);
  }
  for (double& w : out.w) w /= mass;
  return out;
}

double inaccuracy_from_nodes(const std::vector<WeightedNodes>& nodes, const Eigen::MatrixXd& X,
                             const Eigen::VectorXd& beta, double log_sigma2,
                             Eigen::VectorXd* grad) {
  const double sigma2 = std::exp(log_sigma2);
  const Eigen::VectorXd mu = X * beta;
  double total = 0.0;
  Eigen::VectorXd gb = Eigen::VectorXd::Zero(beta.size());
  double gs = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& nd = nodes[i];
    const double mui = mu[static_cast<Eigen::Index>(i)];
    double sq = 0.0;
    double lin = 0.0;
    for (std::size_t k = 0; k < nd.y.size(); ++k) {
      const double d = nd.y[k] - mui;
      sq += nd.w[k] * d * d;
      lin += nd.w[k] * d;
    }
    total += 0.5 * (kLog2Pi + log_sigma2) + sq / (2.0 * sigma2);
    if (grad != nullptr) {
      gb -= (lin / sigma2) * X.row(static_cast<Eigen::Index>(i)).transpose();
      gs += 0.5 - sq / (2.0 * sigma2);
    }
  }
  if (grad != nullptr) {
    grad->resize(beta.size() + 1);
    grad->head(beta.size()) = gb;
    (*grad)[beta.size()] = gs;
  }
  return total;
}

}  // namespace

const char* to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kNormal:
      return "normal";
    case ModelKind::kLogNormal:
      return "lognormal";
    case ModelKind::kFuzzyNormal:
      return "fuzzy-normal";
  }
  return "unknown";
}

DesignMatrix make_design(const std::vector<Covariate>& covariates) {
  std::size_t n = 0;
  bool have_n = false;
  for (const auto& cov : covariates) {
    const std::size_t len =
        cov.kind == Covariate::Kind::kNumeric ? cov.numeric.size() : cov.values.size();
    if (have_n && len != n) throw InputError("covariate '" + cov.name + "' has a different length");
    n = len;
    have_n = true;
  }
  DesignMatrix d;
  d.labels.push_back("(Intercept)");
  std::vector<Eigen::VectorXd> cols;
  cols.push_back(Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n)));
  for (const auto& cov : covariates) {
    if (cov.kind == Covariate::Kind::kNumeric) {
      d.numeric_columns.push_back(static_cast<int>(cols.size()));
      d.labels.push_back(cov.name);
      cols.push_back(to_vector(cov.numeric));
      continue;
    }
    if (std::find(cov.levels.begin(), cov.levels.end(), cov.reference) == cov.levels.end()) {
      throw InputError("reference level '" + cov.reference + "' not declared for '" + cov.name + "'");
    }
    for (const auto& v : cov.values) {
      if (std::find(cov.levels.begin(), cov.levels.end(), v) == cov.levels.end()) {
        throw InputError("undeclared level '" + v + "' in covariate '" + cov.name + "'");
      }
    }
    DummyCoding coding{cov.name, cov.reference, {}, {}};
    for (const auto& level : cov.levels) {
      if (level == cov.reference) continue;
      Eigen::VectorXd col(static_cast<Eigen::Index>(n));
      for (std::size_t i = 0; i < n; ++i) col[static_cast<Eigen::Index>(i)] = cov.values[i] == level ? 1.0 : 0.0;
      coding.levels.push_back(level);
      coding.columns.push_back(static_cast<int>(cols.size()));
      d.labels.push_back(cov.name + " (" + cov.reference + " vs. " + level + ")");
      cols.push_back(std::move(col));
    }
    d.coding.push_back(std::move(coding));
  }
  d.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) d.X.col(static_cast<Eigen::Index>(k)) = cols[k];
  return d;
}

DesignMatrix select_rows(const DesignMatrix& design, std::span<const int> rows) {
  DesignMatrix out = design;
  out.X.resize(static_cast<Eigen::Index>(rows.size()), design.X.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) out.X.row(static_cast<Eigen::Index>(k)) = design.X.row(rows[k]);
  return out;
}

double RegressionFit::predict(std::span<const double> x) const {
  if (static_cast<Eigen::Index>(x.size()) != beta.size()) {
    throw InputError("predictor row length does not match the coefficients");
  }
  return to_vector(x).dot(beta);
}

RegressionFit fit_normal(std::span<const double> y, const DesignMatrix& design, double alpha_level) {
  if (!(alpha_level > 0.0 && alpha_level < 1.0)) throw DomainError("alpha level must lie in (0, 1)");
  const Eigen::VectorXd yv = to_vector(y);
  check_design(design, yv.size());
  const auto& X = design.X;
  const int n = static_cast<int>(X.rows());

  RegressionFit fit;
  fit.kind = ModelKind::kNormal;
  fit.labels = design.labels;
  fit.alpha_level = alpha_level;
  fit.n = n;
  fit.beta = least_squares(X, yv);
  const Eigen::VectorXd resid = yv - X * fit.beta;
  fit.sigma2 = resid.squaredNorm() / n;
  const Eigen::MatrixXd xtx_inv =
      (X.transpose() * X).ldlt().solve(Eigen::MatrixXd::Identity(X.cols(), X.cols()));
  fit.se = (fit.sigma2 * xtx_inv.diagonal()).cwiseSqrt();
  fill_intervals(fit);
  fit.log_likelihood = normal_log_likelihood(n, fit.sigma2);
  const double ybar = yv.mean();
  fit.null_log_likelihood = normal_log_likelihood(n, (yv.array() - ybar).square().mean());
  RegressionFit null_fit;
  null_fit.kind = fit.kind;
  null_fit.n = n;
  null_fit.log_likelihood = fit.null_log_likelihood;
  fit.pseudo_r2 = pseudo_r2(fit, null_fit);
  fit.residual_quartiles = residual_quartiles(resid);
  fit.objective_at_optimum = -fit.log_likelihood;
  return fit;
}

RegressionFit fit_lognormal(std::span<const double> t, const DesignMatrix& design, double alpha_level) {
  std::vector<double> logt(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!(t[i] > 0.0) || !std::isfinite(t[i])) throw InputError("log-normal model needs positive times");
    logt[i] = std::log(t[i]);
  }
  RegressionFit fit = fit_normal(logt, design, alpha_level);
  fit.kind = ModelKind::kLogNormal;
  fit.exp_beta = fit.beta.array().exp();
  fit.exp_se = fit.se.array().exp();
  return fit;
}

double fuzzy_inaccuracy(std::span<const Fptfn> ydata, const DesignMatrix& design,
                        const Eigen::VectorXd& beta, double log_sigma2, Eigen::VectorXd* grad) {
  std::vector<WeightedNodes> nodes;
  nodes.reserve(ydata.size());
  for (const auto& f : ydata) nodes.push_back(standardized_nodes(f));
  return inaccuracy_from_nodes(nodes, design.X, beta, log_sigma2, grad);
}

RegressionFit fit_fuzzy_normal(std::span<const Fptfn> ydata, const DesignMatrix& design,
                               double alpha_level, FuzzyMethod method) {
  if (!(alpha_level > 0.0 && alpha_level < 1.0)) throw DomainError("alpha level must lie in (0, 1)");
  check_design(design, static_cast<Eigen::Index>(ydata.size()));
  const auto& X = design.X;
  const int n = static_cast<int>(X.rows());
  const Eigen::Index p = X.cols();

  Eigen::VectorXd m(n);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) {
    const auto mom = moments(ydata[static_cast<std::size_t>(i)]);
    m[i] = mom.mean;
    v[i] = mom.variance;
  }

  RegressionFit fit;
  fit.kind = ModelKind::kFuzzyNormal;
  fit.labels = design.labels;
  fit.alpha_level = alpha_level;
  fit.n = n;
  fit.beta = least_squares(X, m);
  fit.sigma2 = ((m - X * fit.beta).array().square() + v.array()).mean();

  if (method == FuzzyMethod::kNumeric) {
    std::vector<WeightedNodes> nodes;
    nodes.reserve(ydata.size());
    for (const auto& f : ydata) nodes.push_back(standardized_nodes(f));
    auto objective = [&](const Eigen::VectorXd& theta, Eigen::VectorXd* grad) {
      return inaccuracy_from_nodes(nodes, X, theta.head(p), theta[p], grad);
    };
    Eigen::VectorXd theta0 = Eigen::VectorXd::Zero(p + 1);
    theta0[p] = std::log((m.array().square() + v.array()).mean() + 1e-12);
    optim::LbfgsOptions lo;
    lo.max_iterations = 5000;
    lo.gradient_tolerance = 1e-13;
    lo.step_tolerance = 1e-13;
    lo.memory = 12;
    const auto opt = optim::minimize_lbfgs(objective, theta0, lo);
    if (opt.converged) {
      fit.beta = opt.x.head(p);
      fit.sigma2 = std::exp(opt.x[p]);
    } else {
      fit.converged = false;
      warn("numeric fuzzy fit did not converge (" + opt.message + "); using the closed form");
    }
  }

  // Observed information of the total inaccuracy in (beta, sigma2).
  const Eigen::VectorXd resid = m - X * fit.beta;
  const double s2 = fit.sigma2;
  const double total_sq = (resid.array().square() + v.array()).sum();
  Eigen::MatrixXd info(p + 1, p + 1);
  info.topLeftCorner(p, p) = X.transpose() * X / s2;
  info.topRightCorner(p, 1) = X.transpose() * resid / (s2 * s2);
  info.bottomLeftCorner(1, p) = info.topRightCorner(p, 1).transpose();
  info(p, p) = -0.5 * n / (s2 * s2) + total_sq / (s2 * s2 * s2);
  const Eigen::MatrixXd cov = info.inverse();
  fit.se = cov.diagonal().head(p).cwiseSqrt();
  fill_intervals(fit);

  const double inaccuracy = 0.5 * n * (kLog2Pi + std::log(s2)) + total_sq / (2.0 * s2);
  fit.objective_at_optimum = inaccuracy;
  fit.log_likelihood = -inaccuracy;
  const double mbar = m.mean();
  const double null_s2 = ((m.array() - mbar).square() + v.array()).mean();
  fit.null_log_likelihood = -(0.5 * n * (kLog2Pi + std::log(null_s2)) + 0.5 * n);
  RegressionFit null_fit;
  null_fit.kind = fit.kind;
  null_fit.n = n;
  null_fit.log_likelihood = fit.null_log_likelihood;
  fit.pseudo_r2 = pseudo_r2(fit, null_fit);
  fit.residual_quartiles = residual_quartiles(resid);
  return fit;
}

double pseudo_r2(const RegressionFit& full, const RegressionFit& null) {
  if (full.kind != null.kind) throw InputError("pseudo-R2 needs fits of the same kind");
  if (full.n != null.n || full.n <= 0) throw InputError("pseudo-R2 needs fits on the same sample");
  const double diff = full.log_likelihood - null.log_likelihood;
  if (std::isinf(diff) && diff > 0) return 1.0;
  return std::clamp(1.0 - std::exp(-(2.0 / full.n) * diff), 0.0, 1.0);
}

double cronbach_alpha(const Eigen::MatrixXd& items) {
  const Eigen::Index n = items.rows();
  const Eigen::Index j = items.cols();
  if (j < 2) throw InputError("Cronbach's alpha needs at least two items");
  if (n < 2) throw InputError("Cronbach's alpha needs at least two observations");
  if (items.hasNaN()) throw InputError("Cronbach's alpha does not accept missing values");
  auto var = [](const Eigen::VectorXd& x) {
    return (x.array() - x.mean()).square().sum() / static_cast<double>(x.size() - 1);
  };
  double sum_var = 0.0;
  for (Eigen::Index k = 0; k < j; ++k) sum_var += var(items.col(k));
  const double total = var(items.rowwise().sum());
  if (total <= 0.0) throw UndefinedError("Cronbach's alpha undefined: total score has zero variance");
  const double jj = static_cast<double>(j);
  return jj / (jj - 1.0) * (1.0 - sum_var / total);
}

Eigen::VectorXd alpha_composite(const Eigen::MatrixXd& items, double alpha) {
  const Eigen::VectorXd sums = items.rowwise().sum();
  const double grand = sums.mean();
  return (alpha * sums.array() + (1.0 - alpha) * grand).matrix();
}

}  // namespace firt::regress
