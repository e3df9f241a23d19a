#pragma once

#include <cstdint>
#include <optional>

#include <Eigen/Dense>

#include "firt/data.hpp"
#include "firt/tree.hpp"

namespace firt::simulate {

struct SimConfig {
  int n_raters = 200;
  int n_items = 10;
  TreeSpec tree = TreeSpec::builtin("fig3-linear");
  Eigen::MatrixXd alpha_true;      // J x N
  Eigen::MatrixXd sigma_eta_true;  // N x N, positive semi-definite
  double rt_log_mean = 8.0;        // log milliseconds
  double rt_log_sd = 0.4;
  double rt_midscale_boost = 0.3;  // added to the log mean at mid-scale
  std::uint64_t seed = 1;
  // When set (I x N), traits are taken from here instead of being drawn.
  std::optional<Eigen::MatrixXd> fixed_eta;

  // Throws InputError when dimensions disagree, rt_log_sd <= 0 or the
  // covariance is not symmetric positive semi-definite.
  void validate() const;
};

struct SimTruth {
  Eigen::MatrixXd eta;  // I x N
  Eigen::MatrixXd alpha;
  Eigen::MatrixXd sigma_eta;
  std::uint64_t seed = 0;
};

struct SimResult {
  RatingMatrix ratings;
  ResponseTimeMatrix times;
  SimTruth truth;
};

// Draws traits from N(0, sigma_eta), walks each (rater, item) down the tree
// with Bernoulli node decisions, and draws a log-normal response time whose
// log mean rises linearly towards the middle of the scale. Deterministic in
// the seed.
SimResult simulate(const SimConfig& config);

// J x N matrix with entries uniform on [lo, hi], deterministic in the seed.
Eigen::MatrixXd uniform_alpha(int n_items, int n_nodes, double lo, double hi, std::uint64_t seed);

// Convenience configuration: uniform alpha on [-1.5, 1.5] and identity covariance.
SimConfig default_config(const TreeSpec& tree, int n_raters, int n_items, std::uint64_t seed);

}  // namespace firt::simulate
