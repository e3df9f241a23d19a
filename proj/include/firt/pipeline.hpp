#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "firt/fuzzify.hpp"
#include "firt/io.hpp"
#include "firt/irtree.hpp"
#include "firt/regress.hpp"

namespace firt::pipeline {

namespace fs = std::filesystem;

// Process exit codes shared by the library API and the command-line tool.
enum ExitCode : int {
  kSuccess = 0,
  kFailure = 1,
  kInputError = 2,
  kConvergenceWarning = 3,
};

struct PipelineConfig {
  fs::path ratings_csv;
  fs::path times_csv;
  fs::path covariates_csv;
  fs::path schema_json;
  std::string tree = "fig3-linear";  // built-in name or path to a mapping file
  bool trim = true;
  bool unit_intensification = false;  // W = 1 for the primary fuzzy model
  double alpha_level = 0.05;
  fs::path out_dir = "firt-out";
  // Any of "normal", "lognormal", "fuzzy", "fuzzy-w1".
  std::vector<std::string> models = {"normal", "lognormal", "fuzzy", "fuzzy-w1"};
  std::uint64_t seed = 0;  // recorded in the manifest
  int rating_offset = 0;
  irtree::CovarianceStructure covariance = irtree::CovarianceStructure::kDiagonal;
  int threads = 1;

  nlohmann::json to_json() const;
};

// Built-in name, or a file holding a mapping matrix.
TreeSpec resolve_tree(const std::string& name_or_path);

struct Histogram {
  std::vector<double> edges;  // bins + 1 edges
  std::vector<int> counts;
};

// Fixed-width bins, Sturges count clamped to [10, 15]; a constant sample gives
// a single bin.
Histogram histogram(const std::vector<double>& values);

// Per-rater crisp responses aligned with the regression rows.
struct RegressionInputs {
  std::vector<std::string> rater_ids;
  std::vector<Fptfn> fuzzy;
  std::vector<double> mean_rating;
  std::vector<double> mean_time;
  regress::DesignMatrix design;
  std::vector<regress::Covariate> covariates;  // restricted to the rows
};

// Keeps raters with a composite, complete covariates and at least one present
// rating and time.
RegressionInputs align_regression_inputs(const io::Dataset& data,
                                         const std::vector<io::CompositeRecord>& composite);

struct ModelSet {
  std::vector<std::pair<std::string, regress::RegressionFit>> fits;
  // Agreement between the closed-form and numeric fuzzy solutions.
  double fuzzy_numeric_beta_diff = 0.0;
  double fuzzy_numeric_sigma2_diff = 0.0;
  bool convergence_warning = false;
};

ModelSet fit_models(const RegressionInputs& in, const std::vector<std::string>& models,
                    double alpha_level);

// fits.json: every fit plus the design metadata needed for fitted lines.
nlohmann::json models_to_json(const ModelSet& models, const RegressionInputs& in);

// Human table (3 decimals), machine coefficient table (full precision) and
// flat key-value summary.
std::string render_report(const nlohmann::json& fits);
std::string render_coefficients(const nlohmann::json& fits);
std::string render_summary(const nlohmann::json& fits);

// Share of composite omegas inside [0.95, 1.05].
double omega_concentration(const std::vector<Fptfn>& composite);

// Writes hist_centers.tsv, hist_left_spreads.tsv (c - l), hist_right_spreads.tsv
// (r - c), hist_omega.tsv and, when fits are present, fitted_lines.tsv.
// Returns the file names written.
std::vector<std::string> emit_plot_data(const fs::path& out_dir, const std::vector<Fptfn>& composite,
                                        const nlohmann::json& fits);

struct RunOutcome {
  int exit_code = kSuccess;
  std::vector<std::string> files;
  std::vector<std::string> warnings;
  std::string error;
  bool convergence_warning = false;
};

// trim -> IRTree fit -> fuzzify -> regress -> report. Never throws: failures
// leave the files produced so far plus a manifest with status "failed".
RunOutcome run_pipeline(const PipelineConfig& config);

// Single stages working on files in config.out_dir. Each never throws and
// reports like run_pipeline, without writing a manifest.

// ratings.csv, times.csv, covariates.csv, schema.json and truth.json from a
// default simulation (alpha uniform on [-1.5, 1.5], identity covariance) plus
// random covariates: two binary categorical and one numeric.
RunOutcome run_simulate(const fs::path& out_dir, const std::string& tree, int n_raters, int n_items,
                        std::uint64_t seed);
// times_trimmed.csv and, if ratings are given, ratings_used.csv with the
// trimmed cells masked.
RunOutcome run_trim(const PipelineConfig& config);
// irtree_fit.json from config.ratings_csv.
RunOutcome run_fit_irtree(const PipelineConfig& config);
// C/L/R/W/composite CSVs from the ratings, times and a saved fit.
RunOutcome run_fuzzify(const PipelineConfig& config, const fs::path& fit_json);
// fits.json, coefficients.tsv, summary.tsv and report.txt from the input
// files and a composite CSV. No trimming is applied here.
RunOutcome run_regress(const PipelineConfig& config, const fs::path& composite_csv);
// Re-renders the report tables and plot data from fits.json and composite.csv.
RunOutcome run_report(const fs::path& fits_json, const fs::path& composite_csv, const fs::path& out_dir);

}  // namespace firt::pipeline
