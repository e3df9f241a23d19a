#include "firt/firt.h"

#include <iostream>
#include <memory>
#include <sstream>
#include <string>

#include "firt/diagnostics.hpp"
#include "firt/fuzzy_number.hpp"
#include "firt/irtree.hpp"
#include "firt/pipeline.hpp"
#include "firt/tree.hpp"

struct firt_tree {
  firt::TreeSpec spec;
};

struct firt_config {
  firt::pipeline::PipelineConfig value;
};

namespace {

thread_local std::string last_error;

firt_status fail(firt_status status, const std::string& message) {
  last_error = message;
  return status;
}

template <class F>
firt_status guard(F&& body) {
  try {
    last_error.clear();
    return body();
  } catch (const firt::InputError& e) {
    return fail(FIRT_ERR_INPUT, e.what());
  } catch (const firt::SpecificationError& e) {
    return fail(FIRT_ERR_INPUT, e.what());
  } catch (const firt::DomainError& e) {
    return fail(FIRT_ERR_DOMAIN, e.what());
  } catch (const firt::UndefinedError& e) {
    return fail(FIRT_ERR_UNDEFINED, e.what());
  } catch (const std::exception& e) {
    return fail(FIRT_ERR_FAILURE, e.what());
  } catch (...) {
    return fail(FIRT_ERR_FAILURE, "unknown error");
  }
}

firt_status finish(const firt::pipeline::RunOutcome& outcome) {
  for (const auto& w : outcome.warnings) firt::warn(w);
  if (outcome.exit_code == firt::pipeline::kSuccess) return FIRT_OK;
  if (outcome.exit_code == firt::pipeline::kConvergenceWarning) {
    last_error = "convergence warning";
    return FIRT_CONVERGENCE_WARNING;
  }
  return fail(static_cast<firt_status>(outcome.exit_code), outcome.error);
}

std::string key_of(const char* key) {
  if (key == nullptr) throw std::invalid_argument("null key");
  return key;
}

}  // namespace

extern "C" {

const char* firt_last_error(void) { return last_error.c_str(); }

const char* firt_version(void) { return FIRT_VERSION_STRING; }

void firt_set_warning_callback(firt_warning_fn fn, void* user_data) {
  if (fn == nullptr) {
    firt::set_warning_handler([](std::string_view msg) { std::cerr << "warning: " << msg << '\n'; });
    return;
  }
  firt::set_warning_handler([fn, user_data](std::string_view msg) {
    const std::string text(msg);
    fn(text.c_str(), user_data);
  });
}

firt_status firt_membership(double l, double c, double r, double omega, double y, double* out) {
  if (out == nullptr) return fail(FIRT_ERR_ARGUMENT, "null output pointer");
  return guard([&] {
    *out = firt::membership(firt::Fptfn(l, c, r, omega), y);
    return FIRT_OK;
  });
}

firt_status firt_moments_of(double l, double c, double r, double omega, firt_moments* out) {
  if (out == nullptr) return fail(FIRT_ERR_ARGUMENT, "null output pointer");
  return guard([&] {
    const auto m = firt::moments(firt::Fptfn(l, c, r, omega));
    out->mass = m.mass;
    out->mean = m.mean;
    out->variance = m.variance;
    out->degenerate = m.degenerate ? 1 : 0;
    return FIRT_OK;
  });
}

firt_status firt_tree_load(const char* name_or_path, firt_tree** out) {
  if (name_or_path == nullptr || out == nullptr) return fail(FIRT_ERR_ARGUMENT, "null argument");
  return guard([&] {
    *out = new firt_tree{firt::pipeline::resolve_tree(name_or_path)};
    return FIRT_OK;
  });
}

firt_status firt_tree_parse(const char* text, firt_tree** out) {
  if (text == nullptr || out == nullptr) return fail(FIRT_ERR_ARGUMENT, "null argument");
  return guard([&] {
    *out = new firt_tree{firt::TreeSpec::parse(text)};
    return FIRT_OK;
  });
}

void firt_tree_free(firt_tree* tree) { delete tree; }

int firt_tree_n_nodes(const firt_tree* tree) { return tree == nullptr ? 0 : tree->spec.n_nodes(); }

int firt_tree_n_categories(const firt_tree* tree) { return tree == nullptr ? 0 : tree->spec.n_categories(); }

firt_status firt_category_distribution(const firt_tree* tree, const double* eta, const double* alpha,
                                       double* out) {
  if (tree == nullptr || eta == nullptr || alpha == nullptr || out == nullptr) {
    return fail(FIRT_ERR_ARGUMENT, "null argument");
  }
  return guard([&] {
    const auto n = static_cast<std::size_t>(tree->spec.n_nodes());
    const auto p = firt::irtree::category_distribution(tree->spec, std::span<const double>(eta, n),
                                                       std::span<const double>(alpha, n));
    for (Eigen::Index k = 0; k < p.size(); ++k) out[k] = p[k];
    return FIRT_OK;
  });
}

firt_status firt_config_create(firt_config** out) {
  if (out == nullptr) return fail(FIRT_ERR_ARGUMENT, "null argument");
  return guard([&] {
    *out = new firt_config{};
    return FIRT_OK;
  });
}

void firt_config_free(firt_config* config) { delete config; }

firt_status firt_config_set_string(firt_config* config, const char* key, const char* value) {
  if (config == nullptr || value == nullptr) return fail(FIRT_ERR_ARGUMENT, "null argument");
  return guard([&] {
    auto& c = config->value;
    const std::string k = key_of(key);
    const std::string v = value;
    if (k == "ratings") {
      c.ratings_csv = v;
    } else if (k == "times") {
      c.times_csv = v;
    } else if (k == "covariates") {
      c.covariates_csv = v;
    } else if (k == "schema") {
      c.schema_json = v;
    } else if (k == "tree") {
      c.tree = v;
    } else if (k == "out") {
      c.out_dir = v;
    } else if (k == "models") {
      c.models.clear();
      std::istringstream is(v);
      std::string item;
      while (std::getline(is, item, ',')) {
        if (!item.empty()) c.models.push_back(item);
      }
    } else if (k == "covariance") {
      if (v == "none") {
        c.covariance = firt::irtree::CovarianceStructure::kNone;
      } else if (v == "diagonal") {
        c.covariance = firt::irtree::CovarianceStructure::kDiagonal;
      } else if (v == "full") {
        c.covariance = firt::irtree::CovarianceStructure::kFull;
      } else {
        return fail(FIRT_ERR_ARGUMENT, "covariance must be none, diagonal or full");
      }
    } else {
      return fail(FIRT_ERR_ARGUMENT, "unknown string key '" + k + "'");
    }
    return FIRT_OK;
  });
}

firt_status firt_config_set_bool(firt_config* config, const char* key, int value) {
  if (config == nullptr) return fail(FIRT_ERR_ARGUMENT, "null argument");
  return guard([&] {
    const std::string k = key_of(key);
    if (k == "trim") {
      config->value.trim = value != 0;
    } else if (k == "w_ones") {
      config->value.unit_intensification = value != 0;
    } else {
      return fail(FIRT_ERR_ARGUMENT, "unknown bool key '" + k + "'");
    }
    return FIRT_OK;
  });
}

firt_status firt_config_set_double(firt_config* config, const char* key, double value) {
  if (config == nullptr) return fail(FIRT_ERR_ARGUMENT, "null argument");
  return guard([&] {
    const std::string k = key_of(key);
    if (k != "alpha_level") return fail(FIRT_ERR_ARGUMENT, "unknown double key '" + k + "'");
    if (!(value > 0.0 && value < 1.0)) return fail(FIRT_ERR_ARGUMENT, "alpha_level must lie in (0, 1)");
    config->value.alpha_level = value;
    return FIRT_OK;
  });
}

firt_status firt_config_set_int(firt_config* config, const char* key, int64_t value) {
  if (config == nullptr) return fail(FIRT_ERR_ARGUMENT, "null argument");
  return guard([&] {
    const std::string k = key_of(key);
    if (k == "seed") {
      config->value.seed = static_cast<std::uint64_t>(value);
    } else if (k == "rating_offset") {
      config->value.rating_offset = static_cast<int>(value);
    } else if (k == "threads") {
      if (value < 1) return fail(FIRT_ERR_ARGUMENT, "threads must be at least 1");
      config->value.threads = static_cast<int>(value);
    } else {
      return fail(FIRT_ERR_ARGUMENT, "unknown int key '" + k + "'");
    }
    return FIRT_OK;
  });
}

firt_status firt_simulate(const char* out_dir, const char* tree, int n_raters, int n_items, uint64_t seed) {
  if (out_dir == nullptr || tree == nullptr) return fail(FIRT_ERR_ARGUMENT, "null argument");
  return guard([&] { return finish(firt::pipeline::run_simulate(out_dir, tree, n_raters, n_items, seed)); });
}

firt_status firt_trim(const firt_config* config) {
  if (config == nullptr) return fail(FIRT_ERR_ARGUMENT, "null argument");
  return guard([&] { return finish(firt::pipeline::run_trim(config->value)); });
}

firt_status firt_fit_irtree(const firt_config* config) {
  if (config == nullptr) return fail(FIRT_ERR_ARGUMENT, "null argument");
  return guard([&] { return finish(firt::pipeline::run_fit_irtree(config->value)); });
}

firt_status firt_fuzzify(const firt_config* config, const char* fit_json) {
  if (config == nullptr || fit_json == nullptr) return fail(FIRT_ERR_ARGUMENT, "null argument");
  return guard([&] { return finish(firt::pipeline::run_fuzzify(config->value, fit_json)); });
}

firt_status firt_regress(const firt_config* config, const char* composite_csv) {
  if (config == nullptr || composite_csv == nullptr) return fail(FIRT_ERR_ARGUMENT, "null argument");
  return guard([&] { return finish(firt::pipeline::run_regress(config->value, composite_csv)); });
}

firt_status firt_run(const firt_config* config) {
  if (config == nullptr) return fail(FIRT_ERR_ARGUMENT, "null argument");
  return guard([&] { return finish(firt::pipeline::run_pipeline(config->value)); });
}

firt_status firt_report(const char* fits_json, const char* composite_csv, const char* out_dir) {
  if (fits_json == nullptr || composite_csv == nullptr || out_dir == nullptr) {
    return fail(FIRT_ERR_ARGUMENT, "null argument");
  }
  return guard([&] { return finish(firt::pipeline::run_report(fits_json, composite_csv, out_dir)); });
}

}  // extern "C"
