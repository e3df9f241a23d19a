#include "firt/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "firt/diagnostics.hpp"

namespace firt::io {
namespace {

using nlohmann::json;

bool is_missing_token(const std::string& s) {
  return s.empty() || s == "NA" || s == "na" || s == "NaN" || s == "nan" || s == ".";
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& s, double* out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  const char* first = t.data();
  const char* last = t.data() + t.size();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, *out);
  return ec == std::errc() && ptr == last && std::isfinite(*out);
}

bool parse_int(const std::string& s, int* out) {
  double v;
  if (!parse_double(s, &v) || v != std::floor(v)) return false;
  *out = static_cast<int>(v);
  return true;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = rows > 0 ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = j[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)].get<double>();
  return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(v[k]);
  return a;
}

Eigen::VectorXd vector_from_json(const json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) v[static_cast<Eigen::Index>(k)] = j[k].get<double>();
  return v;
}

const char* covariance_name(irtree::CovarianceStructure cs) {
  switch (cs) {
    case irtree::CovarianceStructure::kNone:
      return "none";
    case irtree::CovarianceStructure::kDiagonal:
      return "diagonal";
    case irtree::CovarianceStructure::kFull:
      return "full";
  }
  return "diagonal";
}

}  // namespace

CsvTable parse_csv(const std::string& text, const std::string& origin) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t k = 0; k < text.size(); ++k) {
    const char ch = text[k];
    if (quoted) {
      if (ch == '"') {
        if (k + 1 < text.size() && text[k + 1] == '"') {
          field += '"';
          ++k;
        } else {
          quoted = false;
        }
      } else {
        field += ch;
      }
      continue;
    }
    if (ch == '"') {
      quoted = true;
      any = true;
    } else if (ch == ',') {
      fields.push_back(trim(field));
      field.clear();
      any = true;
    } else if (ch == '\n') {
      fields.push_back(trim(field));
      field.clear();
      if (any || !fields.front().empty()) records.push_back(std::move(fields));
      fields.clear();
      any = false;
    } else if (ch != '\r') {
      field += ch;
      any = true;
    }
  }
  if (any || !field.empty()) {
    fields.push_back(trim(field));
    records.push_back(std::move(fields));
  }
  if (records.empty()) throw InputError(origin + ": empty CSV file");
  CsvTable t;
  t.header = std::move(records.front());
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != t.header.size()) {
      throw InputError(origin + ": row " + std::to_string(r + 1) + " has " +
                       std::to_string(records[r].size()) + " fields, header has " +
                       std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(records[r]));
  }
  return t;
}

CsvTable read_csv(const fs::path& path) { return parse_csv(read_text(path), path.string()); }

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << text;
}

std::string format_full(double v) {
  if (std::isnan(v)) return "NA";
  if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string format3(double v) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  std::string s(buf);
  if (s == "-0.000") s = "0.000";
  return s;
}

std::vector<std::string> default_ids(int n, const std::string& prefix) {
  std::vector<std::string> ids;
  for (int k = 1; k <= n; ++k) ids.push_back(prefix + std::to_string(k));
  return ids;
}

RatingMatrix parse_ratings(const CsvTable& table, int rating_offset, int* malformed) {
  if (table.header.size() < 2 || table.rows.empty()) throw InputError("ratings file has no data");
  const auto ni = static_cast<Eigen::Index>(table.rows.size());
  const auto nj = static_cast<Eigen::Index>(table.header.size() - 1);
  RatingMatrix r;
  r.values.setConstant(ni, nj, RatingMatrix::kMissing);
  int bad = 0;
  for (Eigen::Index i = 0; i < ni; ++i) {
    for (Eigen::Index j = 0; j < nj; ++j) {
      const auto& cell = table.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j) + 1];
      if (is_missing_token(cell)) continue;
      int v;
      if (!parse_int(cell, &v) || v + rating_offset < 1) {
        ++bad;
        continue;
      }
      r.values(i, j) = v + rating_offset;
    }
  }
  if (malformed != nullptr) *malformed = bad;
  return r;
}

ResponseTimeMatrix parse_times(const CsvTable& table, int* malformed) {
  if (table.header.size() < 2 || table.rows.empty()) throw InputError("times file has no data");
  const auto ni = static_cast<Eigen::Index>(table.rows.size());
  const auto nj = static_cast<Eigen::Index>(table.header.size() - 1);
  ResponseTimeMatrix t;
  t.values.setConstant(ni, nj, ResponseTimeMatrix::missing_value());
  int bad = 0;
  for (Eigen::Index i = 0; i < ni; ++i) {
    for (Eigen::Index j = 0; j < nj; ++j) {
      const auto& cell = table.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j) + 1];
      if (is_missing_token(cell)) continue;
      double v;
      if (!parse_double(cell, &v) || v <= 0.0) {
        ++bad;
        continue;
      }
      t.values(i, j) = v;
    }
  }
  if (malformed != nullptr) *malformed = bad;
  return t;
}

std::vector<regress::Covariate> parse_covariates(const CsvTable& table, const json& schema,
                                                 std::vector<bool>* complete, int* malformed) {
  const std::size_t n = table.rows.size();
  std::vector<bool> ok(n, true);
  int bad = 0;
  auto column = [&](const std::string& name) {
    for (std::size_t k = 0; k < table.header.size(); ++k) {
      if (table.header[k] == name) return k;
    }
    throw InputError("covariate column '" + name + "' not found");
  };
  auto numeric_column = [&](const std::string& name) {
    const auto k = column(name);
    std::vector<double> v(n, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 0; i < n; ++i) {
      const auto& cell = table.rows[i][k];
      if (is_missing_token(cell)) {
        ok[i] = false;
      } else if (!parse_double(cell, &v[i])) {
        ++bad;
        ok[i] = false;
        v[i] = std::numeric_limits<double>::quiet_NaN();
      }
    }
    return v;
  };
  if (!schema.contains("covariates") || !schema["covariates"].is_array()) {
    throw InputError("covariate schema needs a \"covariates\" array");
  }
  std::vector<regress::Covariate> out;
  for (const auto& spec : schema["covariates"]) {
    regress::Covariate cov;
    cov.name = spec.at("name").get<std::string>();
    const auto type = spec.value("type", std::string("numeric"));
    if (type == "numeric") {
      cov.kind = regress::Covariate::Kind::kNumeric;
      cov.numeric = numeric_column(spec.value("column", cov.name));
    } else if (type == "categorical") {
      cov.kind = regress::Covariate::Kind::kCategorical;
      cov.levels = spec.at("levels").get<std::vector<std::string>>();
      cov.reference = spec.value("reference", cov.levels.empty() ? std::string() : cov.levels.front());
      const auto k = column(spec.value("column", cov.name));
      cov.values.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        const auto& cell = table.rows[i][k];
        if (is_missing_token(cell)) {
          ok[i] = false;
          cov.values[i] = cov.reference;
        } else if (std::find(cov.levels.begin(), cov.levels.end(), cell) == cov.levels.end()) {
          ++bad;
          ok[i] = false;
          cov.values[i] = cov.reference;
        } else {
          cov.values[i] = cell;
        }
      }
    } else if (type == "alpha_composite") {
      cov.kind = regress::Covariate::Kind::kNumeric;
      const auto names = spec.at("items").get<std::vector<std::string>>();
      std::vector<std::vector<double>> cols;
      for (const auto& name : names) cols.push_back(numeric_column(name));
      std::vector<std::size_t> rows;
      for (std::size_t i = 0; i < n; ++i) {
        bool present = true;
        for (const auto& c : cols) present = present && !std::isnan(c[i]);
        if (present) rows.push_back(i);
      }
      Eigen::MatrixXd items(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
      for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < cols.size(); ++c)
          items(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = cols[c][rows[r]];
      const double alpha = regress::cronbach_alpha(items);
      const Eigen::VectorXd composite = regress::alpha_composite(items, alpha);
      cov.numeric.assign(n, std::numeric_limits<double>::quiet_NaN());
      for (std::size_t r = 0; r < rows.size(); ++r) cov.numeric[rows[r]] = composite[static_cast<Eigen::Index>(r)];
    } else {
      throw InputError("unknown covariate type '" + type + "'");
    }
    out.push_back(std::move(cov));
  }
  if (complete != nullptr) *complete = std::move(ok);
  if (malformed != nullptr) *malformed = bad;
  return out;
}

Dataset ingest(const fs::path& ratings_csv, const fs::path& times_csv, const fs::path& covariates_csv,
               const fs::path& schema_json, const IngestOptions& options) {
  CsvTable rt = read_csv(ratings_csv);
  CsvTable tt = read_csv(times_csv);
  CsvTable ct = read_csv(covariates_csv);
  if (options.adapter) {
    options.adapter(rt, FileRole::kRatings);
    options.adapter(tt, FileRole::kTimes);
    options.adapter(ct, FileRole::kCovariates);
  }
  if (rt.rows.size() != tt.rows.size() || rt.rows.size() != ct.rows.size()) {
    throw InputError("row counts differ: ratings " + std::to_string(rt.rows.size()) + ", times " +
                     std::to_string(tt.rows.size()) + ", covariates " + std::to_string(ct.rows.size()));
  }
  if (rt.header.size() != tt.header.size()) throw InputError("ratings and times have different item counts");
  for (std::size_t i = 0; i < rt.rows.size(); ++i) {
    if (rt.rows[i][0] != tt.rows[i][0] || rt.rows[i][0] != ct.rows[i][0]) {
      throw InputError("rater id mismatch at row " + std::to_string(i + 2));
    }
  }
  Dataset d;
  for (const auto& row : rt.rows) d.rater_ids.push_back(row[0]);
  d.item_names.assign(rt.header.begin() + 1, rt.header.end());
  d.ratings = parse_ratings(rt, options.rating_offset, &d.report.ratings_malformed);
  d.times = parse_times(tt, &d.report.times_malformed);
  const json schema = json::parse(read_text(schema_json));
  d.covariates = parse_covariates(ct, schema, &d.covariates_complete, &d.report.covariates_malformed);
  if (d.report.ratings_malformed > 0)
    warn(ratings_csv.string() + ": " + std::to_string(d.report.ratings_malformed) + " malformed cell(s) set to NA");
  if (d.report.times_malformed > 0)
    warn(times_csv.string() + ": " + std::to_string(d.report.times_malformed) + " malformed cell(s) set to NA");
  if (d.report.covariates_malformed > 0)
    warn(covariates_csv.string() + ": " + std::to_string(d.report.covariates_malformed) +
         " malformed cell(s) set to NA");
  return d;
}

void write_ratings(const fs::path& path, const std::vector<std::string>& ids,
                   const std::vector<std::string>& items, const RatingMatrix& ratings) {
  std::ostringstream os;
  os << "rater_id";
  for (const auto& it : items) os << ',' << it;
  os << '\n';
  for (int i = 0; i < ratings.n_raters(); ++i) {
    os << ids[static_cast<std::size_t>(i)];
    for (int j = 0; j < ratings.n_items(); ++j) {
      os << ',';
      if (ratings.missing(i, j)) {
        os << "NA";
      } else {
        os << ratings.values(i, j);
      }
    }
    os << '\n';
  }
  write_text(path, os.str());
}

void write_matrix(const fs::path& path, const std::vector<std::string>& ids,
                  const std::vector<std::string>& items, const Eigen::MatrixXd& values) {
  std::ostringstream os;
  os << "rater_id";
  for (const auto& it : items) os << ',' << it;
  os << '\n';
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    os << ids[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < values.cols(); ++j) os << ',' << format_full(values(i, j));
    os << '\n';
  }
  write_text(path, os.str());
}

json to_json(const irtree::IrtreeFit& fit, const TreeSpec& tree) {
  json j;
  j["tree"] = tree.to_text();
  j["covariance"] = covariance_name(fit.covariance);
  j["alpha"] = matrix_to_json(fit.alpha);
  j["sigma_eta"] = matrix_to_json(fit.sigma_eta);
  j["eta_hat"] = matrix_to_json(fit.eta_hat);
  j["log_marginal_likelihood"] = fit.log_marginal_likelihood;
  j["initial_log_marginal_likelihood"] = fit.initial_log_marginal_likelihood;
  j["converged"] = fit.converged;
  j["ridge_applied"] = fit.ridge_applied;
  j["iterations"] = fit.iterations;
  return j;
}

irtree::IrtreeFit irtree_fit_from_json(const json& j) {
  irtree::IrtreeFit fit;
  fit.alpha = matrix_from_json(j.at("alpha"));
  fit.sigma_eta = matrix_from_json(j.at("sigma_eta"));
  fit.eta_hat = matrix_from_json(j.at("eta_hat"));
  const auto cov = j.value("covariance", std::string("diagonal"));
  fit.covariance = cov == "none"   ? irtree::CovarianceStructure::kNone
                   : cov == "full" ? irtree::CovarianceStructure::kFull
                                   : irtree::CovarianceStructure::kDiagonal;
  fit.log_marginal_likelihood = j.value("log_marginal_likelihood", 0.0);
  fit.initial_log_marginal_likelihood = j.value("initial_log_marginal_likelihood", 0.0);
  fit.converged = j.value("converged", false);
  fit.ridge_applied = j.value("ridge_applied", false);
  fit.iterations = j.value("iterations", 0);
  return fit;
}

json to_json(const simulate::SimTruth& truth) {
  json j;
  j["seed"] = truth.seed;
  j["alpha"] = matrix_to_json(truth.alpha);
  j["sigma_eta"] = matrix_to_json(truth.sigma_eta);
  j["eta"] = matrix_to_json(truth.eta);
  return j;
}

json to_json(const regress::RegressionFit& fit) {
  json j;
  j["kind"] = regress::to_string(fit.kind);
  j["labels"] = fit.labels;
  j["beta"] = vector_to_json(fit.beta);
  j["se"] = vector_to_json(fit.se);
  j["ci_lower"] = vector_to_json(fit.ci.col(0));
  j["ci_upper"] = vector_to_json(fit.ci.col(1));
  j["alpha_level"] = fit.alpha_level;
  j["sigma2"] = fit.sigma2;
  j["log_likelihood"] = fit.log_likelihood;
  j["null_log_likelihood"] = fit.null_log_likelihood;
  j["pseudo_r2"] = fit.pseudo_r2;
  j["residual_quartiles"] = fit.residual_quartiles;
  j["objective_at_optimum"] = fit.objective_at_optimum;
  j["n"] = fit.n;
  j["converged"] = fit.converged;
  if (fit.kind == regress::ModelKind::kLogNormal) {
    j["exp_beta"] = vector_to_json(fit.exp_beta);
    j["exp_se"] = vector_to_json(fit.exp_se);
  }
  return j;
}

regress::RegressionFit regression_fit_from_json(const json& j) {
  regress::RegressionFit fit;
  const auto kind = j.at("kind").get<std::string>();
  fit.kind = kind == "lognormal"      ? regress::ModelKind::kLogNormal
             : kind == "fuzzy-normal" ? regress::ModelKind::kFuzzyNormal
                                      : regress::ModelKind::kNormal;
  fit.labels = j.at("labels").get<std::vector<std::string>>();
  fit.beta = vector_from_json(j.at("beta"));
  fit.se = vector_from_json(j.at("se"));
  fit.ci.resize(fit.beta.size(), 2);
  fit.ci.col(0) = vector_from_json(j.at("ci_lower"));
  fit.ci.col(1) = vector_from_json(j.at("ci_upper"));
  fit.alpha_level = j.at("alpha_level").get<double>();
  fit.sigma2 = j.at("sigma2").get<double>();
  fit.log_likelihood = j.at("log_likelihood").get<double>();
  fit.null_log_likelihood = j.at("null_log_likelihood").get<double>();
  fit.pseudo_r2 = j.at("pseudo_r2").get<double>();
  fit.residual_quartiles = j.at("residual_quartiles").get<std::array<double, 3>>();
  fit.objective_at_optimum = j.at("objective_at_optimum").get<double>();
  fit.n = j.at("n").get<int>();
  fit.converged = j.at("converged").get<bool>();
  if (j.contains("exp_beta")) {
    fit.exp_beta = vector_from_json(j["exp_beta"]);
    fit.exp_se = vector_from_json(j["exp_se"]);
  }
  return fit;
}

void write_fuzzy_dataset(const fs::path& dir, const std::vector<std::string>& ids,
                         const std::vector<std::string>& items, const fuzzify::FuzzyDataset& data) {
  write_matrix(dir / "C.csv", ids, items, data.C);
  write_matrix(dir / "L.csv", ids, items, data.L);
  write_matrix(dir / "R.csv", ids, items, data.R);
  write_matrix(dir / "W.csv", ids, items, data.W);
  std::ostringstream os;
  os << "rater_id,l,c,r,omega\n";
  for (std::size_t k = 0; k < data.composite.size(); ++k) {
    const auto& f = data.composite[k];
    os << ids[static_cast<std::size_t>(data.composite_rater[k])] << ',' << format_full(f.l()) << ','
       << format_full(f.c()) << ',' << format_full(f.r()) << ',' << format_full(f.omega()) << '\n';
  }
  write_text(dir / "composite.csv", os.str());
}

fuzzify::FuzzyDataset read_fuzzy_dataset(const fs::path& dir, std::vector<std::string>* ids,
                                         std::vector<std::string>* items) {
  auto load = [&](const char* name) {
    const auto t = read_csv(dir / name);
    Eigen::MatrixXd m(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(t.header.size() - 1));
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      for (std::size_t j = 1; j < t.header.size(); ++j) {
        double v = std::numeric_limits<double>::quiet_NaN();
        if (!is_missing_token(t.rows[i][j]) && !parse_double(t.rows[i][j], &v)) {
          throw InputError(std::string(name) + ": malformed value '" + t.rows[i][j] + "'");
        }
        m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j - 1)) = v;
      }
    }
    return std::pair{t, m};
  };
  fuzzify::FuzzyDataset d;
  auto [ct, c] = load("C.csv");
  d.C = c;
  d.L = load("L.csv").second;
  d.R = load("R.csv").second;
  d.W = load("W.csv").second;
  if (d.L.rows() != d.C.rows() || d.R.rows() != d.C.rows() || d.W.rows() != d.C.rows() ||
      d.L.cols() != d.C.cols() || d.R.cols() != d.C.cols() || d.W.cols() != d.C.cols()) {
    throw InputError("fuzzy parameter matrices differ in shape");
  }
  d.degenerate.setConstant(d.C.rows(), d.C.cols(), false);
  for (Eigen::Index i = 0; i < d.C.rows(); ++i)
    for (Eigen::Index j = 0; j < d.C.cols(); ++j)
      if (!std::isnan(d.C(i, j))) d.degenerate(i, j) = d.cell(static_cast<int>(i), static_cast<int>(j)).degenerate();
  fuzzify::build_composites(d);
  if (ids != nullptr) {
    ids->clear();
    for (const auto& row : ct.rows) ids->push_back(row[0]);
  }
  if (items != nullptr) items->assign(ct.header.begin() + 1, ct.header.end());
  return d;
}

std::vector<CompositeRecord> read_composite(const fs::path& path) {
  const auto t = read_csv(path);
  if (t.header.size() != 5) throw InputError(path.string() + ": expected rater_id,l,c,r,omega");
  std::vector<CompositeRecord> out;
  for (const auto& row : t.rows) {
    double v[4];
    for (int k = 0; k < 4; ++k) {
      if (!parse_double(row[static_cast<std::size_t>(k) + 1], &v[k])) {
        throw InputError(path.string() + ": malformed composite value for rater " + row[0]);
      }
    }
    out.push_back({row[0], Fptfn(v[0], v[1], v[2], v[3])});
  }
  return out;
}

}  // namespace firt::io
