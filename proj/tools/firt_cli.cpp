#include <cstdint>
#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "firt/firt.h"

namespace {

struct Options {
  std::string ratings, times, covariates, schema;
  std::string tree = "fig3-linear";
  std::string out = "firt-out";
  std::string models = "normal,lognormal,fuzzy,fuzzy-w1";
  std::string covariance = "diagonal";
  std::string fit_json, composite, fits_json;
  bool no_trim = false;
  bool w_ones = false;
  double alpha_level = 0.05;
  std::uint64_t seed = 1;
  int rating_offset = 0;
  int threads = 1;
  int n_raters = 200;
  int n_items = 10;
};

int exit_code(firt_status s) {
  switch (s) {
    case FIRT_OK:
      return 0;
    case FIRT_CONVERGENCE_WARNING:
      return 3;
    case FIRT_ERR_INPUT:
    case FIRT_ERR_DOMAIN:
    case FIRT_ERR_ARGUMENT:
      return 2;
    default:
      return 1;
  }
}

int report(firt_status s) {
  if (s == FIRT_CONVERGENCE_WARNING) {
    std::fprintf(stderr, "firt: finished with a convergence warning\n");
  } else if (s != FIRT_OK) {
    std::fprintf(stderr, "firt: error: %s\n", firt_last_error());
  }
  return exit_code(s);
}

// Builds a configuration handle from the parsed options.
firt_status make_config(const Options& o, firt_config** out) {
  firt_status s = firt_config_create(out);
  if (s != FIRT_OK) return s;
  firt_config* c = *out;
  const std::pair<const char*, const std::string*> strings[] = {
      {"ratings", &o.ratings}, {"times", &o.times}, {"covariates", &o.covariates}, {"schema", &o.schema},
      {"tree", &o.tree},       {"out", &o.out},     {"models", &o.models},         {"covariance", &o.covariance}};
  for (const auto& [key, value] : strings) {
    if ((s = firt_config_set_string(c, key, value->c_str())) != FIRT_OK) return s;
  }
  if ((s = firt_config_set_bool(c, "trim", o.no_trim ? 0 : 1)) != FIRT_OK) return s;
  if ((s = firt_config_set_bool(c, "w_ones", o.w_ones ? 1 : 0)) != FIRT_OK) return s;
  if ((s = firt_config_set_double(c, "alpha_level", o.alpha_level)) != FIRT_OK) return s;
  if ((s = firt_config_set_int(c, "seed", static_cast<int64_t>(o.seed))) != FIRT_OK) return s;
  if ((s = firt_config_set_int(c, "rating_offset", o.rating_offset)) != FIRT_OK) return s;
  return firt_config_set_int(c, "threads", o.threads);
}

template <class F>
int with_config(const Options& o, F&& body) {
  firt_config* config = nullptr;
  firt_status s = make_config(o, &config);
  if (s == FIRT_OK) s = body(config);
  firt_config_free(config);
  return report(s);
}

void add_inputs(CLI::App* cmd, Options& o, bool covariates) {
  cmd->add_option("--ratings", o.ratings, "Ratings CSV (rater_id,item...)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--times", o.times, "Response times CSV in ms")->required()->check(CLI::ExistingFile);
  if (covariates) {
    cmd->add_option("--covariates", o.covariates, "Covariates CSV")->required()->check(CLI::ExistingFile);
    cmd->add_option("--schema", o.schema, "Covariate schema JSON")->required()->check(CLI::ExistingFile);
  }
}

void add_tree(CLI::App* cmd, Options& o) {
  cmd->add_option("--tree", o.tree, "Built-in tree (fig3-linear, fig2a) or mapping file")->capture_default_str();
  cmd->add_option("--rating-offset", o.rating_offset, "Added to every rating, e.g. 1 for 0-based scales");
}

void add_fit_controls(CLI::App* cmd, Options& o) {
  cmd->add_option("--covariance", o.covariance, "Latent trait covariance")
      ->check(CLI::IsMember({"none", "diagonal", "full"}))
      ->capture_default_str();
  cmd->add_option("--threads", o.threads, "Worker threads for the marginal likelihood")->check(CLI::PositiveNumber);
}

void add_regression_controls(CLI::App* cmd, Options& o) {
  cmd->add_option("--alpha-level", o.alpha_level, "Significance level for confidence intervals")
      ->check(CLI::Range(1e-6, 0.5))
      ->capture_default_str();
  cmd->add_option("--models", o.models, "Comma list of normal, lognormal, fuzzy, fuzzy-w1 (may be empty)")
      ->capture_default_str();
  cmd->add_flag("--w-ones", o.w_ones, "Set every intensification parameter to one");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fuzzy IRTree analysis of rating data with response times"};
  app.set_version_flag("--version", std::string(firt_version()));
  app.require_subcommand(1);
  Options o;

  auto* sim = app.add_subcommand("simulate", "Simulate ratings, times and covariates");
  sim->add_option("--raters", o.n_raters, "Number of raters")->check(CLI::PositiveNumber)->capture_default_str();
  sim->add_option("--items", o.n_items, "Number of items")->check(CLI::PositiveNumber)->capture_default_str();
  sim->add_option("--tree", o.tree, "Built-in tree or mapping file")->capture_default_str();
  sim->add_option("--seed", o.seed, "Random seed")->capture_default_str();
  sim->add_option("--out", o.out, "Output directory")->capture_default_str();

  auto* trim = app.add_subcommand("trim", "Remove response times beyond two standard deviations per item");
  trim->add_option("--times", o.times, "Response times CSV")->required()->check(CLI::ExistingFile);
  trim->add_option("--ratings", o.ratings, "Ratings CSV; trimmed cells are masked")->check(CLI::ExistingFile);
  add_tree(trim, o);
  trim->add_option("--out", o.out, "Output directory")->capture_default_str();

  auto* fit = app.add_subcommand("fit-irtree", "Fit the IRTree model");
  fit->add_option("--ratings", o.ratings, "Ratings CSV")->required()->check(CLI::ExistingFile);
  add_tree(fit, o);
  add_fit_controls(fit, o);
  fit->add_option("--out", o.out, "Output directory")->capture_default_str();

  auto* fuzz = app.add_subcommand("fuzzify", "Build fuzzy ratings from a fitted IRTree");
  add_inputs(fuzz, o, false);
  fuzz->add_option("--fit", o.fit_json, "irtree_fit.json from fit-irtree")->required()->check(CLI::ExistingFile);
  add_tree(fuzz, o);
  fuzz->add_flag("--no-trim", o.no_trim, "Keep outlying response times");
  fuzz->add_flag("--w-ones", o.w_ones, "Set every intensification parameter to one");
  fuzz->add_option("--out", o.out, "Output directory")->capture_default_str();

  auto* reg = app.add_subcommand("regress", "Fit the crisp and fuzzy regression models");
  add_inputs(reg, o, true);
  reg->add_option("--composite", o.composite, "composite.csv from fuzzify")->required()->check(CLI::ExistingFile);
  reg->add_option("--rating-offset", o.rating_offset, "Added to every rating");
  add_regression_controls(reg, o);
  reg->add_option("--out", o.out, "Output directory")->capture_default_str();

  auto* run = app.add_subcommand("run", "Full pipeline: trim, fit, fuzzify, regress, report");
  add_inputs(run, o, true);
  add_tree(run, o);
  add_fit_controls(run, o);
  add_regression_controls(run, o);
  run->add_flag("--no-trim", o.no_trim, "Keep outlying response times");
  run->add_option("--seed", o.seed, "Seed recorded in the manifest")->capture_default_str();
  run->add_option("--out", o.out, "Output directory")->capture_default_str();

  auto* rep = app.add_subcommand("report", "Re-render tables and plot data from saved fits");
  rep->add_option("--fits", o.fits_json, "fits.json from regress or run")->required()->check(CLI::ExistingFile);
  rep->add_option("--composite", o.composite, "composite.csv")->required()->check(CLI::ExistingFile);
  rep->add_option("--out", o.out, "Output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (sim->parsed()) return report(firt_simulate(o.out.c_str(), o.tree.c_str(), o.n_raters, o.n_items, o.seed));
  if (rep->parsed()) return report(firt_report(o.fits_json.c_str(), o.composite.c_str(), o.out.c_str()));
  if (trim->parsed()) return with_config(o, [](firt_config* c) { return firt_trim(c); });
  if (fit->parsed()) return with_config(o, [](firt_config* c) { return firt_fit_irtree(c); });
  if (fuzz->parsed()) return with_config(o, [&](firt_config* c) { return firt_fuzzify(c, o.fit_json.c_str()); });
  if (reg->parsed()) return with_config(o, [&](firt_config* c) { return firt_regress(c, o.composite.c_str()); });
  return with_config(o, [](firt_config* c) { return firt_run(c); });
}
