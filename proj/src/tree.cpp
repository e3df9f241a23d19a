#include "firt/tree.hpp"

#include <sstream>

#include "firt/diagnostics.hpp"

namespace firt {

TreeSpec::TreeSpec(Eigen::MatrixXi mapping, std::vector<std::string> node_names)
    : mapping_(std::move(mapping)), node_names_(std::move(node_names)) {
  const Eigen::Index m = mapping_.rows();
  const Eigen::Index n = mapping_.cols();
  if (m < 2 || n < 1) throw SpecificationError("tree needs at least 2 categories and 1 node");
  if (node_names_.empty()) {
    for (Eigen::Index k = 0; k < n; ++k) node_names_.push_back("node" + std::to_string(k + 1));
  }
  if (static_cast<Eigen::Index>(node_names_.size()) != n) {
    throw SpecificationError("node name count does not match the mapping matrix");
  }
  for (Eigen::Index a = 0; a < m; ++a) {
    bool any = false;
    for (Eigen::Index k = 0; k < n; ++k) {
      const int v = mapping_(a, k);
      if (v != 0 && v != 1 && v != kNA) {
        throw SpecificationError("mapping entries must be 0, 1 or NA");
      }
      any = any || v != kNA;
    }
    if (!any) {
      throw SpecificationError("category " + std::to_string(a + 1) + " visits no node");
    }
  }
  for (Eigen::Index a = 0; a < m; ++a) {
    for (Eigen::Index b = a + 1; b < m; ++b) {
      bool split = false;
      for (Eigen::Index k = 0; k < n && !split; ++k) {
        split = mapping_(a, k) != kNA && mapping_(b, k) != kNA && mapping_(a, k) != mapping_(b, k);
      }
      if (!split) {
        throw SpecificationError("categories " + std::to_string(a + 1) + " and " +
                                 std::to_string(b + 1) + " share a path");
      }
    }
  }
}

TreeSpec TreeSpec::builtin(std::string_view name) {
  constexpr int NA = kNA;
  if (name == "fig2a") {
    Eigen::MatrixXi t(3, 2);
    t << 1, 0,   //
        0, NA,   //
        1, 1;
    return TreeSpec(t, {"Z1", "Z2"});
  }
  if (name == "fig3-linear") {
    Eigen::MatrixXi t(4, 3);
    t << 0, NA, NA,  //
        1, 0, NA,    //
        1, 1, 0,     //
        1, 1, 1;
    return TreeSpec(t, {"A", "M", "E"});
  }
  throw SpecificationError("unknown built-in tree '" + std::string(name) + "'");
}

std::vector<std::string> TreeSpec::builtin_names() { return {"fig2a", "fig3-linear"}; }

TreeSpec TreeSpec::parse(std::string_view text) {
  std::vector<std::vector<int>> rows;
  std::vector<std::string> names;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    for (char& ch : line) {
      if (ch == ',' || ch == '\t' || ch == '\r') ch = ' ';
    }
    const auto first = line.find_first_not_of(' ');
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line.substr(first));
    std::string tok;
    ls >> tok;
    if (tok == "nodes:" || tok == "nodes") {
      while (ls >> tok) names.push_back(tok);
      continue;
    }
    std::vector<int> row;
    do {
      if (tok == "NA" || tok == "na") {
        row.push_back(kNA);
      } else if (tok == "0" || tok == "1") {
        row.push_back(tok[0] - '0');
      } else {
        throw SpecificationError("invalid mapping token '" + tok + "'");
      }
    } while (ls >> tok);
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw SpecificationError("mapping rows have different lengths");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw SpecificationError("empty tree specification");
  Eigen::MatrixXi t(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t a = 0; a < rows.size(); ++a) {
    for (std::size_t k = 0; k < rows[a].size(); ++k) {
      t(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(k)) = rows[a][k];
    }
  }
  return TreeSpec(t, names);
}

std::string TreeSpec::to_text() const {
  std::ostringstream os;
  os << "nodes:";
  for (const auto& n : node_names_) os << ' ' << n;
  os << '\n';
  for (Eigen::Index a = 0; a < mapping_.rows(); ++a) {
    for (Eigen::Index k = 0; k < mapping_.cols(); ++k) {
      if (k > 0) os << ' ';
      if (mapping_(a, k) == kNA) {
        os << "NA";
      } else {
        os << mapping_(a, k);
      }
    }
    os << '\n';
  }
  return os.str();
}

int TreeSpec::category_from_outcomes(std::span<const int> outcomes) const {
  if (static_cast<int>(outcomes.size()) != n_nodes()) return 0;
  for (int m = 1; m <= n_categories(); ++m) {
    bool match = true;
    for (int k = 0; k < n_nodes() && match; ++k) match = entry(m, k) == outcomes[k];
    if (match) return m;
  }
  return 0;
}

}  // namespace firt
