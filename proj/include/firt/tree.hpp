#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace firt {

// Binary response tree given by its M x N mapping matrix: entry (m, n) is the
// outcome of node n on the path to category m (0 or 1), or kNA when node n is
// not visited. Categories are 1-based in rating data; row m-1 of the matrix
// describes category m.
class TreeSpec {
 public:
  static constexpr int kNA = -1;

  // Throws SpecificationError if a row has no visited node, an entry is not in
  // {0, 1, kNA}, or two categories cannot be told apart (no node on which both
  // are defined and disagree).
  explicit TreeSpec(Eigen::MatrixXi mapping, std::vector<std::string> node_names = {});

  // "fig2a": 3 categories, nodes Z1 (neutral vs. not), Z2 (direction).
  // "fig3-linear": 4 categories, linear nodes A, M, E.
  static TreeSpec builtin(std::string_view name);
  static std::vector<std::string> builtin_names();

  // Text form: one row per category, tokens 0/1/NA separated by spaces,
  // tabs or commas. Lines starting with '#' are comments; an optional
  // "nodes: A M E" line names the columns.
  static TreeSpec parse(std::string_view text);
  std::string to_text() const;

  int n_nodes() const { return static_cast<int>(mapping_.cols()); }
  int n_categories() const { return static_cast<int>(mapping_.rows()); }
  // category is 1-based.
  int entry(int category, int node) const { return mapping_(category - 1, node); }
  bool visits(int category, int node) const { return entry(category, node) != kNA; }
  const Eigen::MatrixXi& mapping() const { return mapping_; }
  const std::vector<std::string>& node_names() const { return node_names_; }

  // Category (1-based) whose path agrees with the given node outcomes
  // (kNA for unvisited nodes). Returns 0 if none matches.
  int category_from_outcomes(std::span<const int> outcomes) const;

 private:
  Eigen::MatrixXi mapping_;
  std::vector<std::string> node_names_;
};

}  // namespace firt
