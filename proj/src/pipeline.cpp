#include "firt/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

#include "firt/diagnostics.hpp"
#include "firt/rng.hpp"
#include "firt/simulate.hpp"
#include "firt/stats.hpp"

namespace firt::pipeline {
namespace {

using nlohmann::json;

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

std::string model_title(const std::string& name) {
  if (name == "normal") return "Normal Linear Model";
  if (name == "lognormal") return "Log-Normal Linear Model";
  if (name == "fuzzy") return "Fuzzy Normal Linear Model";
  if (name == "fuzzy-w1") return "Fuzzy Normal Linear Model (W = 1)";
  return name;
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

std::string histogram_tsv(const Histogram& h) {
  std::ostringstream os;
  os << "bin_lower\tbin_upper\tcount\n";
  for (std::size_t k = 0; k < h.counts.size(); ++k) {
    os << io::format_full(h.edges[k]) << '\t' << io::format_full(h.edges[k + 1]) << '\t' << h.counts[k] << '\n';
  }
  return os.str();
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const InputError*>(&e) != nullptr || dynamic_cast<const SpecificationError*>(&e) != nullptr ||
      dynamic_cast<const DomainError*>(&e) != nullptr || dynamic_cast<const json::exception*>(&e) != nullptr) {
    return kInputError;
  }
  return kFailure;
}

}  // namespace

json PipelineConfig::to_json() const {
  json j;
  j["ratings"] = ratings_csv.generic_string();
  j["times"] = times_csv.generic_string();
  j["covariates"] = covariates_csv.generic_string();
  j["schema"] = schema_json.generic_string();
  j["tree"] = tree;
  j["trim"] = trim;
  j["w_ones"] = unit_intensification;
  j["alpha_level"] = alpha_level;
  j["out"] = out_dir.generic_string();
  j["models"] = models;
  j["seed"] = seed;
  j["rating_offset"] = rating_offset;
  j["covariance"] = covariance_name(covariance);
  j["threads"] = threads;
  return j;
}

TreeSpec resolve_tree(const std::string& name_or_path) {
  for (const auto& name : TreeSpec::builtin_names()) {
    if (name == name_or_path) return TreeSpec::builtin(name);
  }
  if (!fs::exists(name_or_path)) {
    throw InputError("tree '" + name_or_path + "' is neither a built-in name nor a readable file");
  }
  return TreeSpec::parse(io::read_text(name_or_path));
}

Histogram histogram(const std::vector<double>& values) {
  Histogram h;
  if (values.empty()) return h;
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  const double lo = *mn;
  const double hi = *mx;
  if (hi - lo <= 1e-12 * std::max(1.0, std::abs(lo))) {
    h.edges = {lo, hi};
    h.counts = {static_cast<int>(values.size())};
    return h;
  }
  const int sturges = static_cast<int>(std::ceil(std::log2(static_cast<double>(values.size())))) + 1;
  const int bins = std::clamp(sturges, 10, 15);
  const double width = (hi - lo) / bins;
  for (int k = 0; k <= bins; ++k) h.edges.push_back(k == bins ? hi : lo + k * width);
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  for (double v : values) {
    int k = static_cast<int>(std::floor((v - lo) / width));
    k = std::clamp(k, 0, bins - 1);
    ++h.counts[static_cast<std::size_t>(k)];
  }
  return h;
}

RegressionInputs align_regression_inputs(const io::Dataset& data,
                                         const std::vector<io::CompositeRecord>& composite) {
  std::map<std::string, const Fptfn*> by_id;
  for (const auto& rec : composite) by_id[rec.rater_id] = &rec.value;
  RegressionInputs in;
  std::vector<int> rows;
  for (int i = 0; i < data.ratings.n_raters(); ++i) {
    const auto& id = data.rater_ids[static_cast<std::size_t>(i)];
    const auto it = by_id.find(id);
    if (it == by_id.end() || !data.covariates_complete[static_cast<std::size_t>(i)]) continue;
    double rsum = 0.0, tsum = 0.0;
    int rn = 0, tn = 0;
    for (int j = 0; j < data.ratings.n_items(); ++j) {
      if (!data.ratings.missing(i, j)) {
        rsum += data.ratings.values(i, j);
        ++rn;
      }
      if (!data.times.missing(i, j)) {
        tsum += data.times.values(i, j);
        ++tn;
      }
    }
    if (rn == 0 || tn == 0) continue;
    rows.push_back(i);
    in.rater_ids.push_back(id);
    in.fuzzy.push_back(*it->second);
    in.mean_rating.push_back(rsum / rn);
    in.mean_time.push_back(tsum / tn);
  }
  for (const auto& cov : data.covariates) {
    regress::Covariate c = cov;
    c.numeric.clear();
    c.values.clear();
    for (int i : rows) {
      if (cov.kind == regress::Covariate::Kind::kNumeric) {
        c.numeric.push_back(cov.numeric[static_cast<std::size_t>(i)]);
      } else {
        c.values.push_back(cov.values[static_cast<std::size_t>(i)]);
      }
    }
    in.covariates.push_back(std::move(c));
  }
  in.design = regress::make_design(in.covariates);
  return in;
}

ModelSet fit_models(const RegressionInputs& in, const std::vector<std::string>& models, double alpha_level) {
  ModelSet out;
  for (const auto& name : models) {
    if (name == "normal") {
      out.fits.emplace_back(name, regress::fit_normal(in.mean_rating, in.design, alpha_level));
    } else if (name == "lognormal") {
      out.fits.emplace_back(name, regress::fit_lognormal(in.mean_time, in.design, alpha_level));
    } else if (name == "fuzzy") {
      auto closed = regress::fit_fuzzy_normal(in.fuzzy, in.design, alpha_level, regress::FuzzyMethod::kClosedForm);
      const auto numeric =
          regress::fit_fuzzy_normal(in.fuzzy, in.design, alpha_level, regress::FuzzyMethod::kNumeric);
      out.fuzzy_numeric_beta_diff = (closed.beta - numeric.beta).lpNorm<Eigen::Infinity>();
      out.fuzzy_numeric_sigma2_diff = std::abs(closed.sigma2 - numeric.sigma2);
      if (!numeric.converged) {
        closed.converged = false;
        out.convergence_warning = true;
      }
      out.fits.emplace_back(name, std::move(closed));
    } else if (name == "fuzzy-w1") {
      std::vector<Fptfn> unit;
      unit.reserve(in.fuzzy.size());
      for (const auto& f : in.fuzzy) unit.emplace_back(f.l(), f.c(), f.r(), 1.0);
      out.fits.emplace_back(name, regress::fit_fuzzy_normal(unit, in.design, alpha_level));
    } else {
      throw InputError("unknown model '" + name + "' (expected normal, lognormal, fuzzy, fuzzy-w1)");
    }
  }
  return out;
}

json models_to_json(const ModelSet& models, const RegressionInputs& in) {
  json j;
  j["models"] = json::array();
  for (const auto& [name, fit] : models.fits) {
    j["models"].push_back({{"name", name}, {"fit", io::to_json(fit)}});
  }
  json design;
  design["labels"] = in.design.labels;
  design["categorical"] = json::array();
  for (const auto& cov : in.covariates) {
    if (cov.kind != regress::Covariate::Kind::kCategorical) continue;
    json c;
    c["name"] = cov.name;
    c["reference"] = cov.reference;
    c["levels"] = cov.levels;
    json cols = json::object();
    for (const auto& coding : in.design.coding) {
      if (coding.covariate != cov.name) continue;
      for (std::size_t k = 0; k < coding.levels.size(); ++k) cols[coding.levels[k]] = coding.columns[k];
    }
    c["columns"] = cols;
    design["categorical"].push_back(c);
  }
  design["numeric"] = json::array();
  std::size_t numeric_index = 0;
  for (const auto& cov : in.covariates) {
    if (cov.kind != regress::Covariate::Kind::kNumeric) continue;
    const auto [mn, mx] = std::minmax_element(cov.numeric.begin(), cov.numeric.end());
    design["numeric"].push_back({{"name", cov.name},
                                 {"column", in.design.numeric_columns[numeric_index++]},
                                 {"min", *mn},
                                 {"max", *mx},
                                 {"mean", stats::mean(cov.numeric)}});
  }
  j["design"] = design;
  j["n"] = in.rater_ids.size();
  j["fuzzy_numeric_check"] = {{"max_abs_beta_diff", models.fuzzy_numeric_beta_diff},
                              {"sigma2_abs_diff", models.fuzzy_numeric_sigma2_diff}};
  j["omega_concentration"] = omega_concentration(in.fuzzy);
  return j;
}

std::string render_report(const json& fits) {
  std::ostringstream os;
  for (const auto& m : fits.at("models")) {
    const auto name = m.at("name").get<std::string>();
    const auto fit = io::regression_fit_from_json(m.at("fit"));
    const bool lognormal = fit.kind == regress::ModelKind::kLogNormal;
    os << model_title(name) << ":\n";
    os << "Residuals quantiles: Q1: " << io::format3(fit.residual_quartiles[0])
       << ", Med: " << io::format3(fit.residual_quartiles[1]) << ", Q3: " << io::format3(fit.residual_quartiles[2])
       << '\n';
    std::size_t width = 0;
    for (const auto& l : fit.labels) width = std::max(width, l.size());
    for (Eigen::Index k = 0; k < fit.beta.size(); ++k) {
      os << "  " << pad(fit.labels[static_cast<std::size_t>(k)], width + 2) << io::format3(fit.beta[k]) << " ("
         << io::format3(fit.se[k]) << ")  [" << io::format3(fit.ci(k, 0)) << ", " << io::format3(fit.ci(k, 1)) << "]";
      if (lognormal) {
        os << "  exp: " << io::format3(fit.exp_beta[k]) << " (" << io::format3(fit.exp_se[k]) << ")";
      }
      os << '\n';
    }
    os << "sigma2 = " << io::format3(fit.sigma2) << '\n';
    os << "pseudo-R2 = " << io::format3(fit.pseudo_r2) << "\n\n";
  }
  if (!fits.at("models").empty()) {
    const double a = fits["models"][0]["fit"].at("alpha_level").get<double>();
    os << "Confidence level: " << io::format3(1.0 - a) << '\n';
  }
  if (fits.contains("omega_concentration")) {
    os << "Composite omega within [0.95, 1.05]: " << io::format3(100.0 * fits["omega_concentration"].get<double>())
       << "%\n";
  }
  return os.str();
}

std::string render_coefficients(const json& fits) {
  std::ostringstream os;
  os << "model\tlabel\testimate\tse\tci_lower\tci_upper\texp_estimate\texp_se\n";
  for (const auto& m : fits.at("models")) {
    const auto name = m.at("name").get<std::string>();
    const auto fit = io::regression_fit_from_json(m.at("fit"));
    for (Eigen::Index k = 0; k < fit.beta.size(); ++k) {
      os << name << '\t' << fit.labels[static_cast<std::size_t>(k)] << '\t' << io::format_full(fit.beta[k]) << '\t'
         << io::format_full(fit.se[k]) << '\t' << io::format_full(fit.ci(k, 0)) << '\t'
         << io::format_full(fit.ci(k, 1)) << '\t';
      if (fit.exp_beta.size() == fit.beta.size()) {
        os << io::format_full(fit.exp_beta[k]) << '\t' << io::format_full(fit.exp_se[k]);
      } else {
        os << "NA\tNA";
      }
      os << '\n';
    }
  }
  return os.str();
}

std::string render_summary(const json& fits) {
  std::ostringstream os;
  os << "key\tvalue\n";
  for (const auto& m : fits.at("models")) {
    const auto name = m.at("name").get<std::string>();
    const auto fit = io::regression_fit_from_json(m.at("fit"));
    os << name << ".n\t" << fit.n << '\n';
    os << name << ".sigma2\t" << io::format_full(fit.sigma2) << '\n';
    os << name << ".pseudo_r2\t" << io::format_full(fit.pseudo_r2) << '\n';
    os << name << ".log_likelihood\t" << io::format_full(fit.log_likelihood) << '\n';
    os << name << ".residual_q1\t" << io::format_full(fit.residual_quartiles[0]) << '\n';
    os << name << ".residual_median\t" << io::format_full(fit.residual_quartiles[1]) << '\n';
    os << name << ".residual_q3\t" << io::format_full(fit.residual_quartiles[2]) << '\n';
    os << name << ".converged\t" << (fit.converged ? "true" : "false") << '\n';
  }
  if (fits.contains("fuzzy_numeric_check")) {
    os << "fuzzy.numeric_max_abs_beta_diff\t"
       << io::format_full(fits["fuzzy_numeric_check"]["max_abs_beta_diff"].get<double>()) << '\n';
    os << "fuzzy.numeric_sigma2_abs_diff\t"
       << io::format_full(fits["fuzzy_numeric_check"]["sigma2_abs_diff"].get<double>()) << '\n';
  }
  if (fits.contains("omega_concentration")) {
    os << "omega_concentration\t" << io::format_full(fits["omega_concentration"].get<double>()) << '\n';
  }
  if (fits.contains("irtree")) {
    for (const auto& [k, v] : fits["irtree"].items()) os << "irtree." << k << '\t' << v.dump() << '\n';
  }
  return os.str();
}

double omega_concentration(const std::vector<Fptfn>& composite) {
  if (composite.empty()) return 0.0;
  int inside = 0;
  for (const auto& f : composite) {
    if (f.omega() >= 0.95 && f.omega() <= 1.05) ++inside;
  }
  return static_cast<double>(inside) / static_cast<double>(composite.size());
}

std::vector<std::string> emit_plot_data(const fs::path& out_dir, const std::vector<Fptfn>& composite,
                                        const json& fits) {
  std::vector<double> centers, left, right, omega;
  for (const auto& f : composite) {
    centers.push_back(f.c());
    left.push_back(f.c() - f.l());
    right.push_back(f.r() - f.c());
    omega.push_back(f.omega());
  }
  std::vector<std::string> files;
  const std::pair<const char*, const std::vector<double>*> hists[] = {
      {"hist_centers.tsv", &centers},
      {"hist_left_spreads.tsv", &left},
      {"hist_right_spreads.tsv", &right},
      {"hist_omega.tsv", &omega}};
  for (const auto& [name, values] : hists) {
    io::write_text(out_dir / name, histogram_tsv(histogram(*values)));
    files.emplace_back(name);
  }

  if (!fits.is_object() || !fits.contains("models") || fits["models"].empty()) return files;
  const auto& design = fits.at("design");
  if (design.at("numeric").empty()) return files;

  // Cartesian product of all categorical levels.
  std::vector<std::vector<std::pair<std::string, int>>> groups{{}};  // (label, column or -1)
  for (const auto& cat : design.at("categorical")) {
    std::vector<std::vector<std::pair<std::string, int>>> next;
    for (const auto& g : groups) {
      for (const auto& level : cat.at("levels")) {
        const auto lv = level.get<std::string>();
        int col = -1;
        if (cat.at("columns").contains(lv)) col = cat["columns"][lv].get<int>();
        auto ng = g;
        ng.emplace_back(cat.at("name").get<std::string>() + "=" + lv, col);
        next.push_back(std::move(ng));
      }
    }
    groups = std::move(next);
  }
  const auto& focus = design.at("numeric")[0];
  const int focus_col = focus.at("column").get<int>();
  const double xmin = focus.at("min").get<double>();
  const double xmax = focus.at("max").get<double>();
  constexpr int kPoints = 25;

  std::ostringstream os;
  os << "model\tgroup\tx\tfitted\n";
  for (const auto& m : fits.at("models")) {
    const auto name = m.at("name").get<std::string>();
    const auto fit = io::regression_fit_from_json(m.at("fit"));
    for (const auto& g : groups) {
      std::vector<double> row(static_cast<std::size_t>(fit.beta.size()), 0.0);
      row[0] = 1.0;
      for (const auto& num : design.at("numeric")) {
        row[num.at("column").get<std::size_t>()] = num.at("mean").get<double>();
      }
      std::string label;
      for (const auto& [lv, col] : g) {
        if (!label.empty()) label += ';';
        label += lv;
        if (col >= 0) row[static_cast<std::size_t>(col)] = 1.0;
      }
      if (label.empty()) label = "all";
      for (int k = 0; k < kPoints; ++k) {
        const double x = xmin + (xmax - xmin) * k / (kPoints - 1);
        row[static_cast<std::size_t>(focus_col)] = x;
        os << name << '\t' << label << '\t' << io::format_full(x) << '\t' << io::format_full(fit.predict(row))
           << '\n';
      }
    }
  }
  io::write_text(out_dir / "fitted_lines.tsv", os.str());
  files.emplace_back("fitted_lines.tsv");
  return files;
}

namespace {

struct Table {
  std::vector<std::string> ids;
  std::vector<std::string> items;
};

Table table_labels(const io::CsvTable& t) {
  Table out;
  for (const auto& row : t.rows) out.ids.push_back(row[0]);
  out.items.assign(t.header.begin() + 1, t.header.end());
  return out;
}

RatingMatrix load_ratings(const PipelineConfig& config, const TreeSpec& tree, Table* labels) {
  const auto table = io::read_csv(config.ratings_csv);
  int malformed = 0;
  auto ratings = io::parse_ratings(table, config.rating_offset, &malformed);
  if (malformed > 0) warn(config.ratings_csv.string() + ": " + std::to_string(malformed) + " malformed cell(s) set to NA");
  ratings.validate(tree.n_categories());
  if (labels != nullptr) *labels = table_labels(table);
  return ratings;
}

ResponseTimeMatrix load_times(const fs::path& path, Table* labels) {
  const auto table = io::read_csv(path);
  int malformed = 0;
  auto times = io::parse_times(table, &malformed);
  if (malformed > 0) warn(path.string() + ": " + std::to_string(malformed) + " malformed cell(s) set to NA");
  if (labels != nullptr) *labels = table_labels(table);
  return times;
}

// Removes outlying times and masks the matching ratings.
void apply_trim(ResponseTimeMatrix& times, RatingMatrix* ratings) {
  const auto trimmed = fuzzify::trim_times(times);
  if (ratings != nullptr) {
    for (int i = 0; i < ratings->n_raters(); ++i)
      for (int j = 0; j < ratings->n_items(); ++j)
        if (!times.missing(i, j) && trimmed.missing(i, j)) ratings->values(i, j) = RatingMatrix::kMissing;
  }
  times = trimmed;
}

void check_same_shape(const RatingMatrix& r, const ResponseTimeMatrix& t) {
  if (r.n_raters() != t.values.rows() || r.n_items() != t.values.cols()) {
    throw InputError("ratings and times have different dimensions");
  }
}

std::vector<io::CompositeRecord> composite_records(const fuzzify::FuzzyDataset& fuzzy,
                                                   const std::vector<std::string>& ids) {
  std::vector<io::CompositeRecord> out;
  for (std::size_t k = 0; k < fuzzy.composite.size(); ++k) {
    out.push_back({ids[static_cast<std::size_t>(fuzzy.composite_rater[k])], fuzzy.composite[k]});
  }
  return out;
}

void write_tables(const fs::path& out, const json& fits, RunOutcome& outcome) {
  io::write_text(out / "fits.json", fits.dump(2) + "\n");
  io::write_text(out / "coefficients.tsv", render_coefficients(fits));
  io::write_text(out / "summary.tsv", render_summary(fits));
  io::write_text(out / "report.txt", render_report(fits));
  for (const char* f : {"fits.json", "coefficients.tsv", "summary.tsv", "report.txt"}) outcome.files.emplace_back(f);
}

// Fits the requested models and writes the regression tables. Returns the
// fits document; *plotted receives the composites actually used.
json regress_and_write(const PipelineConfig& config, const io::Dataset& data,
                       const std::vector<io::CompositeRecord>& composite, const json& extra,
                       std::vector<Fptfn>* plotted, RunOutcome& outcome) {
  json fits;
  plotted->clear();
  for (const auto& rec : composite) plotted->push_back(rec.value);
  if (!config.models.empty()) {
    const auto inputs = align_regression_inputs(data, composite);
    const auto models = fit_models(inputs, config.models, config.alpha_level);
    if (models.convergence_warning) outcome.convergence_warning = true;
    fits = models_to_json(models, inputs);
    *plotted = inputs.fuzzy;
  } else {
    fits["models"] = json::array();
    fits["omega_concentration"] = omega_concentration(*plotted);
  }
  if (!extra.is_null()) fits["irtree"] = extra;
  write_tables(config.out_dir, fits, outcome);
  return fits;
}

// Runs body, translating exceptions into exit codes and collecting warnings.
template <class F>
RunOutcome guarded(F&& body) {
  RunOutcome outcome;
  WarningCapture capture;
  try {
    body(outcome);
    outcome.exit_code = outcome.convergence_warning ? kConvergenceWarning : kSuccess;
  } catch (const std::exception& e) {
    outcome.error = e.what();
    outcome.exit_code = exit_code_for(e);
  }
  outcome.warnings = capture.messages();
  return outcome;
}

json irtree_summary(const irtree::IrtreeFit& fit, int n_fallback) {
  return {{"converged", fit.converged},
          {"iterations", fit.iterations},
          {"log_marginal_likelihood", fit.log_marginal_likelihood},
          {"ridge_applied", fit.ridge_applied},
          {"bounds_fallback_cells", n_fallback}};
}

}  // namespace

RunOutcome run_pipeline(const PipelineConfig& config) {
  RunOutcome outcome;
  WarningCapture capture;
  std::string stage = "setup";
  json manifest;
  manifest["tool"] = "firt";
  manifest["version"] = FIRT_VERSION_STRING;
  manifest["seed"] = config.seed;
  manifest["config"] = config.to_json();
  manifest["stages"] = json::array();
  const auto& out = config.out_dir;

  try {
    fs::create_directories(out);
    const TreeSpec tree = resolve_tree(config.tree);

    stage = "ingest";
    io::IngestOptions opts;
    opts.rating_offset = config.rating_offset;
    io::Dataset data =
        io::ingest(config.ratings_csv, config.times_csv, config.covariates_csv, config.schema_json, opts);
    data.ratings.validate(tree.n_categories());
    manifest["stages"].push_back(stage);

    stage = "trim";
    if (config.trim) apply_trim(data.times, &data.ratings);
    io::write_matrix(out / "times_trimmed.csv", data.rater_ids, data.item_names, data.times.values);
    io::write_ratings(out / "ratings_used.csv", data.rater_ids, data.item_names, data.ratings);
    outcome.files.emplace_back("times_trimmed.csv");
    outcome.files.emplace_back("ratings_used.csv");
    manifest["stages"].push_back(stage);

    stage = "fit-irtree";
    irtree::FitOptions fo;
    fo.covariance = config.covariance;
    fo.threads = config.threads;
    const auto fit = irtree::fit(tree, data.ratings, fo);
    io::write_text(out / "irtree_fit.json", io::to_json(fit, tree).dump(2) + "\n");
    outcome.files.emplace_back("irtree_fit.json");
    if (!fit.converged) outcome.convergence_warning = true;
    manifest["stages"].push_back(stage);

    stage = "fuzzify";
    fuzzify::FuzzifyOptions fz;
    fz.unit_intensification = config.unit_intensification;
    const auto fuzzy = fuzzify::fuzzify_all(fit, tree, data.ratings, data.times, fz);
    io::write_fuzzy_dataset(out, data.rater_ids, data.item_names, fuzzy);
    for (const char* f : {"C.csv", "L.csv", "R.csv", "W.csv", "composite.csv"}) outcome.files.emplace_back(f);
    manifest["stages"].push_back(stage);

    stage = "regress";
    std::vector<Fptfn> plotted;
    const json fits = regress_and_write(config, data, composite_records(fuzzy, data.rater_ids),
                                        irtree_summary(fit, fuzzy.n_fallback), &plotted, outcome);
    manifest["stages"].push_back(stage);

    stage = "report";
    for (auto& f : emit_plot_data(out, plotted, fits)) outcome.files.push_back(std::move(f));
    manifest["stages"].push_back(stage);

    manifest["status"] = "ok";
    outcome.exit_code = outcome.convergence_warning ? kConvergenceWarning : kSuccess;
  } catch (const std::exception& e) {
    outcome.error = stage + ": " + e.what();
    outcome.exit_code = exit_code_for(e);
    manifest["status"] = "failed";
    manifest["failed_stage"] = stage;
    manifest["error"] = e.what();
  }

  outcome.warnings = capture.messages();
  manifest["warnings"] = outcome.warnings;
  manifest["convergence_warning"] = outcome.convergence_warning;
  manifest["exit_code"] = outcome.exit_code;
  auto files = outcome.files;
  files.emplace_back("manifest.json");
  std::sort(files.begin(), files.end());
  manifest["files"] = files;
  try {
    io::write_text(out / "manifest.json", manifest.dump(2) + "\n");
    outcome.files.emplace_back("manifest.json");
  } catch (const std::exception& e) {
    if (outcome.error.empty()) outcome.error = std::string("manifest: ") + e.what();
    if (outcome.exit_code == kSuccess) outcome.exit_code = kFailure;
  }
  return outcome;
}

RunOutcome run_simulate(const fs::path& out_dir, const std::string& tree_name, int n_raters, int n_items,
                        std::uint64_t seed) {
  return guarded([&](RunOutcome& outcome) {
    const TreeSpec tree = resolve_tree(tree_name);
    const auto config = simulate::default_config(tree, n_raters, n_items, seed);
    const auto sim = simulate::simulate(config);
    const auto ids = io::default_ids(n_raters, "r");
    const auto items = io::default_ids(n_items, "item");
    io::write_ratings(out_dir / "ratings.csv", ids, items, sim.ratings);
    io::write_matrix(out_dir / "times.csv", ids, items, sim.times.values);

    Rng rng(seed ^ 0xc2b2ae3d27d4eb4fULL);
    std::ostringstream cov;
    cov << "rater_id,gender,religiousness,emotional_stability\n";
    for (int i = 0; i < n_raters; ++i) {
      const char* gender = rng.bernoulli(0.5) ? "M" : "F";
      const char* rel = rng.bernoulli(0.5) ? "Yes" : "No";
      cov << ids[static_cast<std::size_t>(i)] << ',' << gender << ',' << rel << ','
          << io::format_full(std::round(1000.0 * (3.0 + 0.8 * rng.normal())) / 1000.0) << '\n';
    }
    io::write_text(out_dir / "covariates.csv", cov.str());
    const json schema = {{"covariates",
                          {{{"name", "gender"}, {"type", "categorical"}, {"levels", {"F", "M"}}, {"reference", "F"}},
                           {{"name", "religiousness"},
                            {"type", "categorical"},
                            {"levels", {"No", "Yes"}},
                            {"reference", "No"}},
                           {{"name", "emotional_stability"}, {"type", "numeric"}}}}};
    io::write_text(out_dir / "schema.json", schema.dump(2) + "\n");
    json truth = io::to_json(sim.truth);
    truth["tree"] = tree.to_text();
    io::write_text(out_dir / "truth.json", truth.dump(2) + "\n");
    outcome.files = {"ratings.csv", "times.csv", "covariates.csv", "schema.json", "truth.json"};
  });
}

RunOutcome run_trim(const PipelineConfig& config) {
  return guarded([&](RunOutcome& outcome) {
    Table labels;
    auto times = load_times(config.times_csv, &labels);
    if (config.ratings_csv.empty()) {
      apply_trim(times, nullptr);
    } else {
      auto ratings = load_ratings(config, resolve_tree(config.tree), nullptr);
      check_same_shape(ratings, times);
      apply_trim(times, &ratings);
      io::write_ratings(config.out_dir / "ratings_used.csv", labels.ids, labels.items, ratings);
      outcome.files.emplace_back("ratings_used.csv");
    }
    io::write_matrix(config.out_dir / "times_trimmed.csv", labels.ids, labels.items, times.values);
    outcome.files.emplace_back("times_trimmed.csv");
  });
}

RunOutcome run_fit_irtree(const PipelineConfig& config) {
  return guarded([&](RunOutcome& outcome) {
    const TreeSpec tree = resolve_tree(config.tree);
    const auto ratings = load_ratings(config, tree, nullptr);
    irtree::FitOptions fo;
    fo.covariance = config.covariance;
    fo.threads = config.threads;
    const auto fit = irtree::fit(tree, ratings, fo);
    io::write_text(config.out_dir / "irtree_fit.json", io::to_json(fit, tree).dump(2) + "\n");
    outcome.files.emplace_back("irtree_fit.json");
    outcome.convergence_warning = !fit.converged;
  });
}

RunOutcome run_fuzzify(const PipelineConfig& config, const fs::path& fit_json) {
  return guarded([&](RunOutcome& outcome) {
    const TreeSpec tree = resolve_tree(config.tree);
    Table labels;
    auto ratings = load_ratings(config, tree, &labels);
    auto times = load_times(config.times_csv, nullptr);
    check_same_shape(ratings, times);
    if (config.trim) apply_trim(times, &ratings);
    const auto fit = io::irtree_fit_from_json(json::parse(io::read_text(fit_json)));
    fuzzify::FuzzifyOptions fz;
    fz.unit_intensification = config.unit_intensification;
    const auto fuzzy = fuzzify::fuzzify_all(fit, tree, ratings, times, fz);
    io::write_fuzzy_dataset(config.out_dir, labels.ids, labels.items, fuzzy);
    for (const char* f : {"C.csv", "L.csv", "R.csv", "W.csv", "composite.csv"}) outcome.files.emplace_back(f);
  });
}

RunOutcome run_regress(const PipelineConfig& config, const fs::path& composite_csv) {
  return guarded([&](RunOutcome& outcome) {
    io::IngestOptions opts;
    opts.rating_offset = config.rating_offset;
    const auto data =
        io::ingest(config.ratings_csv, config.times_csv, config.covariates_csv, config.schema_json, opts);
    auto composite = io::read_composite(composite_csv);
    if (config.unit_intensification) {
      for (auto& rec : composite) rec.value = Fptfn(rec.value.l(), rec.value.c(), rec.value.r(), 1.0);
    }
    std::vector<Fptfn> plotted;
    regress_and_write(config, data, composite, json(), &plotted, outcome);
  });
}

RunOutcome run_report(const fs::path& fits_json, const fs::path& composite_csv, const fs::path& out_dir) {
  return guarded([&](RunOutcome& outcome) {
    const json fits = json::parse(io::read_text(fits_json));
    std::vector<Fptfn> composite;
    for (auto& rec : io::read_composite(composite_csv)) composite.push_back(rec.value);
    write_tables(out_dir, fits, outcome);
    for (auto& f : emit_plot_data(out_dir, composite, fits)) outcome.files.push_back(std::move(f));
  });
}

}  // namespace firt::pipeline
