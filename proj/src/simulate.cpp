#include "firt/simulate.hpp"

#include <cmath>
#include <vector>

#include "firt/diagnostics.hpp"
#include "firt/irtree.hpp"
#include "firt/rng.hpp"

namespace firt::simulate {
namespace {

// Symmetric square root of a PSD matrix, tolerant of exact zeros.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& s) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
  Eigen::VectorXd ev = es.eigenvalues();
  for (Eigen::Index k = 0; k < ev.size(); ++k) ev[k] = std::sqrt(std::max(ev[k], 0.0));
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

// Sequential walk: at each step pick the first undecided node shared by all
// remaining categories, draw its outcome and drop inconsistent categories.
int walk(const TreeSpec& tree, const Eigen::VectorXd& eta, const Eigen::VectorXd& alpha, Rng& rng) {
  std::vector<int> candidates;
  for (int m = 1; m <= tree.n_categories(); ++m) candidates.push_back(m);
  std::vector<bool> decided(static_cast<std::size_t>(tree.n_nodes()), false);
  while (candidates.size() > 1) {
    int node = -1;
    for (int n = 0; n < tree.n_nodes() && node < 0; ++n) {
      if (decided[static_cast<std::size_t>(n)]) continue;
      bool shared = true;
      for (int m : candidates) shared = shared && tree.visits(m, n);
      if (shared) node = n;
    }
    if (node < 0) throw SpecificationError("tree has no node shared by the remaining categories");
    decided[static_cast<std::size_t>(node)] = true;
    const int z = rng.bernoulli(irtree::node_probability(eta[node], alpha[node])) ? 1 : 0;
    std::erase_if(candidates, [&](int m) { return tree.entry(m, node) != z; });
  }
  if (candidates.empty()) throw SpecificationError("tree walk left no category");
  return candidates.front();
}

}  // namespace

void SimConfig::validate() const {
  const int nn = tree.n_nodes();
  if (n_raters < 1 || n_items < 1) throw InputError("simulation needs at least one rater and item");
  if (alpha_true.rows() != n_items || alpha_true.cols() != nn) {
    throw InputError("alpha_true must be n_items x n_nodes");
  }
  if (sigma_eta_true.rows() != nn || sigma_eta_true.cols() != nn) {
    throw InputError("sigma_eta_true must be n_nodes x n_nodes");
  }
  if ((sigma_eta_true - sigma_eta_true.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw InputError("sigma_eta_true must be symmetric");
  }
  if (nn > 0 && !sigma_eta_true.isZero(0.0)) {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma_eta_true);
    if (es.eigenvalues().minCoeff() < -1e-12) throw InputError("sigma_eta_true is not positive semi-definite");
  }
  if (!(rt_log_sd > 0.0)) throw InputError("rt_log_sd must be positive");
  if (rt_midscale_boost < 0.0) throw InputError("rt_midscale_boost must be nonnegative");
  if (fixed_eta && (fixed_eta->rows() != n_raters || fixed_eta->cols() != nn)) {
    throw InputError("fixed_eta must be n_raters x n_nodes");
  }
}

SimResult simulate(const SimConfig& config) {
  config.validate();
  const int nn = config.tree.n_nodes();
  const int ni = config.n_raters;
  const int nj = config.n_items;
  const int m = config.tree.n_categories();
  Rng rng(config.seed);

  SimResult out;
  out.truth.alpha = config.alpha_true;
  out.truth.sigma_eta = config.sigma_eta_true;
  out.truth.seed = config.seed;
  if (config.fixed_eta) {
    out.truth.eta = *config.fixed_eta;
  } else {
    const Eigen::MatrixXd root = psd_sqrt(config.sigma_eta_true);
    out.truth.eta.resize(ni, nn);
    for (int i = 0; i < ni; ++i) {
      Eigen::VectorXd z(nn);
      for (int k = 0; k < nn; ++k) z[k] = rng.normal();
      out.truth.eta.row(i) = (root * z).transpose();
    }
  }

  out.ratings.values.resize(ni, nj);
  out.times.values.resize(ni, nj);
  for (int i = 0; i < ni; ++i) {
    const Eigen::VectorXd eta = out.truth.eta.row(i).transpose();
    for (int j = 0; j < nj; ++j) {
      const Eigen::VectorXd alpha = config.alpha_true.row(j).transpose();
      const int y = walk(config.tree, eta, alpha, rng);
      out.ratings.values(i, j) = y;
      const double pos = 2.0 * (y - 1) / static_cast<double>(m - 1) - 1.0;
      const double log_mean = config.rt_log_mean + config.rt_midscale_boost * (1.0 - std::abs(pos));
      out.times.values(i, j) = std::exp(log_mean + config.rt_log_sd * rng.normal());
    }
  }
  return out;
}

Eigen::MatrixXd uniform_alpha(int n_items, int n_nodes, double lo, double hi, std::uint64_t seed) {
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  Eigen::MatrixXd a(n_items, n_nodes);
  for (int j = 0; j < n_items; ++j)
    for (int n = 0; n < n_nodes; ++n) a(j, n) = lo + (hi - lo) * rng.uniform();
  return a;
}

SimConfig default_config(const TreeSpec& tree, int n_raters, int n_items, std::uint64_t seed) {
  SimConfig c;
  c.tree = tree;
  c.n_raters = n_raters;
  c.n_items = n_items;
  c.alpha_true = uniform_alpha(n_items, tree.n_nodes(), -1.5, 1.5, seed);
  c.sigma_eta_true = Eigen::MatrixXd::Identity(tree.n_nodes(), tree.n_nodes());
  c.seed = seed;
  return c;
}

}  // namespace firt::simulate
