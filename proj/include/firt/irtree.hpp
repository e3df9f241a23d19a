#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "firt/data.hpp"
#include "firt/tree.hpp"

namespace firt::irtree {

// One binary pseudo-observation produced by expanding a rating along its
// tree path.
struct PseudoObservation {
  int rater;
  int item;
  int node;
  int outcome;  // 0 or 1

  friend bool operator==(const PseudoObservation&, const PseudoObservation&) = default;
};

// Rows are ordered by rater, item, node. Missing ratings produce no rows.
std::vector<PseudoObservation> dendrify(const TreeSpec& tree, const RatingMatrix& ratings);

// Logistic probability of outcome 1 at a node, exp(eta + alpha) / (1 + exp(eta + alpha)).
double node_probability(double eta, double alpha);

// Probability of each category (index m-1 for category m): product over the
// visited nodes of pi^t (1 - pi)^(1 - t).
Eigen::VectorXd category_distribution(const TreeSpec& tree, std::span<const double> eta,
                                      std::span<const double> alpha);
Eigen::VectorXd category_distribution(const TreeSpec& tree, const Eigen::VectorXd& eta,
                                      const Eigen::VectorXd& alpha);

enum class CovarianceStructure {
  kNone,      // no random effects: sigma_eta fixed at zero
  kDiagonal,  // independent node traits
  kFull,      // unrestricted positive-definite covariance
};

struct FitOptions {
  CovarianceStructure covariance = CovarianceStructure::kDiagonal;
  int max_iterations = 500;
  double step_tolerance = 1e-9;
  double gradient_tolerance = 1e-9;
  double ridge = 1e-4;  // applied only when a separated item-node cell is found
  int threads = 1;      // raters are split across this many workers
};

struct IrtreeFit {
  Eigen::MatrixXd alpha;      // J x N item-node easiness
  Eigen::MatrixXd sigma_eta;  // N x N latent covariance
  Eigen::MatrixXd eta_hat;    // I x N posterior modes
  CovarianceStructure covariance = CovarianceStructure::kDiagonal;
  double log_marginal_likelihood = 0.0;
  double initial_log_marginal_likelihood = 0.0;
  bool converged = false;
  bool ridge_applied = false;
  int iterations = 0;
};

// Posterior mode of one rater's traits under N(0, sigma_eta), found by damped
// Newton on the log-concave posterior.
struct PosteriorMode {
  Eigen::VectorXd mode;
  double gradient_norm = 0.0;
  // Laplace approximation of log integral p(rows | eta) N(eta; 0, sigma) d eta.
  double log_marginal = 0.0;
  int iterations = 0;
};

// rows must all belong to the same rater.
PosteriorMode posterior_mode(std::span<const PseudoObservation> rows,
                             const Eigen::MatrixXd& alpha, const Eigen::MatrixXd& sigma_eta);

// Laplace-approximated marginal log-likelihood summed over raters in fixed
// order. A zero sigma_eta evaluates the plain logistic likelihood at eta = 0.
double log_marginal_likelihood(const TreeSpec& tree, const RatingMatrix& ratings,
                               const Eigen::MatrixXd& alpha, const Eigen::MatrixXd& sigma_eta,
                               int threads = 1);

// Marginal maximum likelihood fit. Never throws on non-convergence; the best
// iterate is returned with converged = false. Throws InputError for fewer than
// two raters or an item-node cell without observations.
IrtreeFit fit(const TreeSpec& tree, const RatingMatrix& ratings, const FitOptions& options = {});

// I x N posterior modes at the fitted parameters; raters without responses get 0.
Eigen::MatrixXd predict_eta(const IrtreeFit& fit, const TreeSpec& tree,
                            const RatingMatrix& ratings);

}  // namespace firt::irtree
