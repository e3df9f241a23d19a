#include "firt/irtree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

#include "firt/diagnostics.hpp"
#include "firt/optim.hpp"

namespace firt::irtree {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// log(1 + exp(x)) without overflow.
double log1pexp(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

// Offsets into a rater-sorted row list: rows of rater i are [off[i], off[i+1]).
std::vector<std::size_t> rater_offsets(const std::vector<PseudoObservation>& rows, int n_raters) {
  std::vector<std::size_t> off(static_cast<std::size_t>(n_raters) + 1, 0);
  for (const auto& r : rows) ++off[static_cast<std::size_t>(r.rater) + 1];
  for (std::size_t i = 1; i < off.size(); ++i) off[i] += off[i - 1];
  return off;
}

double log_likelihood_at(std::span<const PseudoObservation> rows, const Eigen::MatrixXd& alpha,
                         const Eigen::VectorXd& eta) {
  double ll = 0.0;
  for (const auto& r : rows) {
    const double s = eta[r.node] + alpha(r.item, r.node);
    ll += r.outcome * s - log1pexp(s);
  }
  return ll;
}

// Sums per-rater Laplace terms; contributions are reduced in rater order so the
// result does not depend on the thread count.
double sum_marginals(const std::vector<PseudoObservation>& rows,
                     const std::vector<std::size_t>& off, const Eigen::MatrixXd& alpha,
                     const Eigen::MatrixXd& sigma, int threads) {
  const int n_raters = static_cast<int>(off.size()) - 1;
  std::vector<double> parts(static_cast<std::size_t>(n_raters), 0.0);
  auto work = [&](int begin, int end) {
    for (int i = begin; i < end; ++i) {
      const auto b = off[static_cast<std::size_t>(i)];
      const auto e = off[static_cast<std::size_t>(i) + 1];
      if (b == e) continue;
      std::span<const PseudoObservation> span(rows.data() + b, e - b);
      parts[static_cast<std::size_t>(i)] = posterior_mode(span, alpha, sigma).log_marginal;
    }
  };
  threads = std::clamp(threads, 1, std::max(1, n_raters));
  if (threads == 1) {
    work(0, n_raters);
  } else {
    std::vector<std::jthread> pool;
    const int chunk = (n_raters + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      const int b = t * chunk;
      const int e = std::min(n_raters, b + chunk);
      if (b < e) pool.emplace_back(work, b, e);
    }
  }
  double total = 0.0;
  for (double p : parts) total += p;
  return total;
}

int n_covariance_params(CovarianceStructure cs, int n) {
  switch (cs) {
    case CovarianceStructure::kNone:
      return 0;
    case CovarianceStructure::kDiagonal:
      return n;
    case CovarianceStructure::kFull:
      return n * (n + 1) / 2;
  }
  return 0;
}

// Log-Cholesky parametrisation: diagonal entries of L are exp(param).
Eigen::MatrixXd sigma_from_params(CovarianceStructure cs, int n, const double* p) {
  Eigen::MatrixXd chol = Eigen::MatrixXd::Zero(n, n);
  if (cs == CovarianceStructure::kNone) return chol;
  if (cs == CovarianceStructure::kDiagonal) {
    for (int k = 0; k < n; ++k) chol(k, k) = std::exp(p[k]);
  } else {
    int idx = 0;
    for (int a = 0; a < n; ++a) {
      for (int b = 0; b <= a; ++b) {
        chol(a, b) = (a == b) ? std::exp(p[idx]) : p[idx];
        ++idx;
      }
    }
  }
  return chol * chol.transpose();
}

}  // namespace

std::vector<PseudoObservation> dendrify(const TreeSpec& tree, const RatingMatrix& ratings) {
  std::vector<PseudoObservation> rows;
  for (int i = 0; i < ratings.n_raters(); ++i) {
    for (int j = 0; j < ratings.n_items(); ++j) {
      if (ratings.missing(i, j)) continue;
      const int y = ratings.values(i, j);
      if (y < 1 || y > tree.n_categories()) {
        throw InputError("rating " + std::to_string(y) + " outside the tree's categories");
      }
      for (int n = 0; n < tree.n_nodes(); ++n) {
        if (tree.visits(y, n)) rows.push_back({i, j, n, tree.entry(y, n)});
      }
    }
  }
  return rows;
}

double node_probability(double eta, double alpha) {
  const double s = eta + alpha;
  if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

Eigen::VectorXd category_distribution(const TreeSpec& tree, std::span<const double> eta,
                                      std::span<const double> alpha) {
  const int nn = tree.n_nodes();
  if (static_cast<int>(eta.size()) != nn || static_cast<int>(alpha.size()) != nn) {
    throw InputError("eta and alpha must have one entry per tree node");
  }
  Eigen::VectorXd probs(tree.n_categories());
  for (int m = 1; m <= tree.n_categories(); ++m) {
    double p = 1.0;
    for (int n = 0; n < nn; ++n) {
      const int t = tree.entry(m, n);
      if (t == TreeSpec::kNA) continue;
      const double pi = node_probability(eta[n], alpha[n]);
      p *= (t == 1) ? pi : 1.0 - pi;
    }
    probs[m - 1] = p;
  }
  return probs;
}

Eigen::VectorXd category_distribution(const TreeSpec& tree, const Eigen::VectorXd& eta,
                                      const Eigen::VectorXd& alpha) {
  return category_distribution(tree, std::span<const double>(eta.data(), eta.size()),
                               std::span<const double>(alpha.data(), alpha.size()));
}

PosteriorMode posterior_mode(std::span<const PseudoObservation> rows, const Eigen::MatrixXd& alpha,
                             const Eigen::MatrixXd& sigma_eta) {
  const int n = static_cast<int>(alpha.cols());
  PosteriorMode out;
  out.mode = Eigen::VectorXd::Zero(n);
  if (sigma_eta.isZero(0.0)) {
    out.log_marginal = log_likelihood_at(rows, alpha, out.mode);
    return out;
  }
  const Eigen::LLT<Eigen::MatrixXd> sigma_llt(sigma_eta);
  if (sigma_llt.info() != Eigen::Success) {
    out.log_marginal = -kInf;
    return out;
  }
  const Eigen::MatrixXd precision = sigma_llt.solve(Eigen::MatrixXd::Identity(n, n));
  double log_det_sigma = 0.0;
  for (int k = 0; k < n; ++k) log_det_sigma += 2.0 * std::log(sigma_llt.matrixL()(k, k));

  Eigen::VectorXd eta = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd grad(n);
  Eigen::MatrixXd neg_hess(n, n);
  auto objective = [&](const Eigen::VectorXd& e) {
    return log_likelihood_at(rows, alpha, e) - 0.5 * e.dot(precision * e);
  };
  auto derivatives = [&](const Eigen::VectorXd& e) {
    grad = -precision * e;
    neg_hess = precision;
    for (const auto& r : rows) {
      const double pi = node_probability(e[r.node], alpha(r.item, r.node));
      grad[r.node] += r.outcome - pi;
      neg_hess(r.node, r.node) += pi * (1.0 - pi);
    }
  };

  double h = objective(eta);
  for (out.iterations = 0; out.iterations < 200; ++out.iterations) {
    derivatives(eta);
    if (grad.lpNorm<Eigen::Infinity>() <= 1e-13) break;
    const Eigen::VectorXd delta = neg_hess.llt().solve(grad);
    double step = 1.0;
    Eigen::VectorXd trial = eta + delta;
    double h_trial = objective(trial);
    while (h_trial < h - 1e-12 * std::abs(h) && step > 1e-10) {
      step *= 0.5;
      trial = eta + step * delta;
      h_trial = objective(trial);
    }
    eta = trial;
    h = h_trial;
    if ((step * delta).lpNorm<Eigen::Infinity>() <= 1e-15 * std::max(1.0, eta.lpNorm<Eigen::Infinity>())) {
      derivatives(eta);
      break;
    }
  }
  const Eigen::LLT<Eigen::MatrixXd> hess_llt(neg_hess);
  double log_det_hess = 0.0;
  for (int k = 0; k < n; ++k) log_det_hess += 2.0 * std::log(hess_llt.matrixL()(k, k));
  out.mode = eta;
  out.gradient_norm = grad.norm();
  out.log_marginal = h - 0.5 * log_det_sigma - 0.5 * log_det_hess;
  return out;
}

double log_marginal_likelihood(const TreeSpec& tree, const RatingMatrix& ratings,
                               const Eigen::MatrixXd& alpha, const Eigen::MatrixXd& sigma_eta,
                               int threads) {
  const auto rows = dendrify(tree, ratings);
  const auto off = rater_offsets(rows, ratings.n_raters());
  return sum_marginals(rows, off, alpha, sigma_eta, threads);
}

IrtreeFit fit(const TreeSpec& tree, const RatingMatrix& ratings, const FitOptions& options) {
  ratings.validate(tree.n_categories());
  const int n_raters = ratings.n_raters();
  const int n_items = ratings.n_items();
  const int n_nodes = tree.n_nodes();
  if (n_raters < 2) throw InputError("IRTree fit needs at least two raters");

  const auto rows = dendrify(tree, ratings);
  const auto off = rater_offsets(rows, n_raters);

  Eigen::MatrixXd count = Eigen::MatrixXd::Zero(n_items, n_nodes);
  Eigen::MatrixXd ones = Eigen::MatrixXd::Zero(n_items, n_nodes);
  for (const auto& r : rows) {
    count(r.item, r.node) += 1.0;
    ones(r.item, r.node) += r.outcome;
  }
  bool separated = false;
  Eigen::MatrixXd alpha0(n_items, n_nodes);
  for (int j = 0; j < n_items; ++j) {
    for (int n = 0; n < n_nodes; ++n) {
      if (count(j, n) == 0.0) {
        throw InputError("item " + std::to_string(j + 1) + " has no observations at node " +
                         tree.node_names()[static_cast<std::size_t>(n)]);
      }
      const double p = ones(j, n) / count(j, n);
      if (p == 0.0 || p == 1.0) separated = true;
      const double logit = std::log(p) - std::log1p(-p);
      alpha0(j, n) = std::clamp(logit, -3.0, 3.0);
    }
  }
  const double ridge = separated ? options.ridge : 0.0;
  if (separated) {
    std::ostringstream os;
    os << "separated item-node cell (all responses 0 or 1); ridge penalty " << options.ridge
       << " * |alpha|^2 applied";
    warn(os.str());
  }

  const int n_alpha = n_items * n_nodes;
  const int n_cov = n_covariance_params(options.covariance, n_nodes);
  auto unpack_alpha = [&](const Eigen::VectorXd& theta) {
    Eigen::MatrixXd a(n_items, n_nodes);
    for (int j = 0; j < n_items; ++j)
      for (int n = 0; n < n_nodes; ++n) a(j, n) = theta[j * n_nodes + n];
    return a;
  };
  auto unpack_sigma = [&](const Eigen::VectorXd& theta) {
    return sigma_from_params(options.covariance, n_nodes, theta.data() + n_alpha);
  };
  auto neg_log_lik = [&](const Eigen::VectorXd& theta) {
    return -sum_marginals(rows, off, unpack_alpha(theta), unpack_sigma(theta), options.threads);
  };
  auto penalized = [&](const Eigen::VectorXd& theta) {
    const double v = neg_log_lik(theta);
    if (!std::isfinite(v)) return kInf;
    return v + ridge * theta.head(n_alpha).squaredNorm();
  };

  Eigen::VectorXd theta0 = Eigen::VectorXd::Zero(n_alpha + n_cov);
  for (int j = 0; j < n_items; ++j)
    for (int n = 0; n < n_nodes; ++n) theta0[j * n_nodes + n] = alpha0(j, n);
  double start_value = penalized(theta0);
  for (int attempt = 1; !std::isfinite(start_value) && attempt <= 5; ++attempt) {
    warn("non-positive-definite covariance at start; retrying from jittered Cholesky factor");
    for (int k = 0; k < n_cov; ++k) theta0[n_alpha + k] += 0.1 * attempt * ((k % 2 == 0) ? 1 : -1);
    start_value = penalized(theta0);
  }

  IrtreeFit result;
  result.covariance = options.covariance;
  result.ridge_applied = separated;
  result.initial_log_marginal_likelihood = -neg_log_lik(theta0);

  optim::LbfgsOptions lo;
  lo.max_iterations = options.max_iterations;
  lo.step_tolerance = options.step_tolerance;
  lo.gradient_tolerance = options.gradient_tolerance;
  const auto opt = optim::minimize_lbfgs(optim::with_central_differences(penalized, 1e-5),
                                         theta0, lo);

  result.converged = opt.converged;
  result.iterations = opt.iterations;
  result.alpha = unpack_alpha(opt.x);
  result.sigma_eta = unpack_sigma(opt.x);
  result.log_marginal_likelihood = -neg_log_lik(opt.x);
  if (!opt.converged) warn("IRTree fit did not converge: " + opt.message);
  result.eta_hat = predict_eta(result, tree, ratings);
  return result;
}

Eigen::MatrixXd predict_eta(const IrtreeFit& fit, const TreeSpec& tree, const RatingMatrix& ratings) {
  const auto rows = dendrify(tree, ratings);
  const auto off = rater_offsets(rows, ratings.n_raters());
  Eigen::MatrixXd eta = Eigen::MatrixXd::Zero(ratings.n_raters(), tree.n_nodes());
  for (int i = 0; i < ratings.n_raters(); ++i) {
    const auto b = off[static_cast<std::size_t>(i)];
    const auto e = off[static_cast<std::size_t>(i) + 1];
    if (b == e) continue;
    std::span<const PseudoObservation> span(rows.data() + b, e - b);
    eta.row(i) = posterior_mode(span, fit.alpha, fit.sigma_eta).mode.transpose();
  }
  return eta;
}

}  // namespace firt::irtree
