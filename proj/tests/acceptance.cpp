// Acceptance suite: one line per criterion, exit status 1 if any criterion
// fails. Criteria that need unavailable external data report UNVERIFIED.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <string>

#include "firt/diagnostics.hpp"
#include "firt/fuzzify.hpp"
#include "firt/fuzzy_number.hpp"
#include "firt/io.hpp"
#include "firt/irtree.hpp"
#include "firt/pipeline.hpp"
#include "firt/regress.hpp"
#include "firt/simulate.hpp"
#include "firt/stats.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
namespace rg = firt::regress;
using firt::Fptfn;

namespace {

// Pinned tolerances.
constexpr double kTriangleTol = 1e-12;
constexpr double kMomentRelTol = 1e-6;
constexpr double kMembershipSeconds = 10.0;
constexpr double kSumTol = 1e-12;
constexpr double kAlphaMae = 0.3;
constexpr double kEtaCorr = 0.5;
constexpr int kRecoverySeeds = 10;
constexpr int kRecoveryNeeded = 9;
constexpr double kRecoverySeconds = 300.0;
constexpr double kBetaAgree = 1e-6;
constexpr double kSigma2Agree = 1e-5;
constexpr double kPointMassTol = 1e-8;
constexpr double kDecompositionTol = 1e-8;
constexpr double kInaccuracySeconds = 60.0;
constexpr double kNormalEqTol = 1e-10;
constexpr double kCoverageMin = 0.90;
constexpr int kCoverageReps = 500;

enum class Verdict { kPass, kFail, kUnverified };

struct Outcome {
  Verdict verdict;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double rel_err(double got, double want) { return std::abs(got - want) / std::max(std::abs(want), 1e-300); }

Outcome membership_correctness() {
  const auto t0 = Clock::now();
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst_tri = 0.0, worst_mom = 0.0;
  for (int rep = 0; rep < 1000; ++rep) {
    const double l = -5.0 + 10.0 * u(gen);
    const double c = l + 0.05 + 3.0 * u(gen);
    const double r = c + 0.05 + 3.0 * u(gen);
    const double w = 0.05 + 1.95 * u(gen);
    const Fptfn lin(l, c, r, 1.0);
    for (int k = 0; k < 20; ++k) {
      const double y = l + (r - l) * u(gen);
      const double tri = y <= c ? (y - l) / (c - l) : (r - y) / (r - c);
      worst_tri = std::max(worst_tri, std::abs(firt::membership(lin, y) - tri));
    }
    const auto m = firt::moments(Fptfn(l, c, r, w));
    const auto b = oracle::riemann_moments(l, c, r, w);
    worst_mom = std::max({worst_mom, rel_err(m.mass, b.mass), std::abs(m.mean - b.mean) / (r - l),
                          rel_err(m.variance, b.variance)});
  }
  const double secs = seconds_since(t0);
  const bool ok = worst_tri <= kTriangleTol && worst_mom <= kMomentRelTol && secs < kMembershipSeconds;
  return {ok ? Verdict::kPass : Verdict::kFail,
          "max |tri diff| " + fmt("%.2e", worst_tri) + ", max moment rel err " + fmt("%.2e", worst_mom) + ", " +
              fmt("%.1f s", secs)};
}

Outcome probability_coherence() {
  std::mt19937_64 gen(77);
  std::normal_distribution<double> nd(0.0, 3.0);
  const auto lin = firt::TreeSpec::builtin("fig3-linear");
  const auto a = firt::TreeSpec::builtin("fig2a");
  double worst = 0.0;
  for (int rep = 0; rep < 1000; ++rep) {
    const auto& tree = rep % 2 == 0 ? lin : a;
    Eigen::VectorXd eta(tree.n_nodes()), alpha(tree.n_nodes());
    for (int k = 0; k < tree.n_nodes(); ++k) {
      eta[k] = nd(gen);
      alpha[k] = nd(gen);
    }
    worst = std::max(worst, std::abs(firt::irtree::category_distribution(tree, eta, alpha).sum() - 1.0));
  }
  const auto p = firt::irtree::category_distribution(lin, Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(3));
  const bool exact = p[0] == 0.5 && p[1] == 0.25 && p[2] == 0.125 && p[3] == 0.125;
  return {worst <= kSumTol && exact ? Verdict::kPass : Verdict::kFail,
          "max |sum - 1| " + fmt("%.2e", worst) + ", zero-parameter distribution " + (exact ? "exact" : "NOT exact")};
}

Outcome irtree_recovery() {
  const auto t0 = Clock::now();
  const auto tree = firt::TreeSpec::builtin("fig3-linear");
  int good = 0;
  int good_at_truth = 0;
  std::string per_seed;
  for (int s = 1; s <= kRecoverySeeds; ++s) {
    const auto cfg = firt::simulate::default_config(tree, 200, 10, static_cast<std::uint64_t>(1000 + s));
    const auto sim = firt::simulate::simulate(cfg);
    firt::WarningCapture quiet;
    const auto fit = firt::irtree::fit(tree, sim.ratings);
    const double mae = (fit.alpha - cfg.alpha_true).cwiseAbs().mean();
    double min_corr = 1.0;
    for (int k = 0; k < 3; ++k) {
      min_corr = std::min(min_corr, oracle::pearson(fit.eta_hat.col(k), sim.truth.eta.col(k)));
    }
    if (mae < kAlphaMae && min_corr > kEtaCorr) ++good;
    // Same posterior modes at the generating parameters: the attainable ceiling.
    auto truth = fit;
    truth.alpha = cfg.alpha_true;
    truth.sigma_eta = cfg.sigma_eta_true;
    const auto eta_truth = firt::irtree::predict_eta(truth, tree, sim.ratings);
    double min_corr_truth = 1.0;
    for (int k = 0; k < 3; ++k) {
      min_corr_truth = std::min(min_corr_truth, oracle::pearson(eta_truth.col(k), sim.truth.eta.col(k)));
    }
    if (min_corr_truth > kEtaCorr) ++good_at_truth;
    per_seed += fmt(" %.2f", mae) + "/" + fmt("%.2f", min_corr);
  }
  const double secs = seconds_since(t0);
  const bool ok = good >= kRecoveryNeeded && secs < kRecoverySeconds;
  return {ok ? Verdict::kPass : Verdict::kFail,
          std::to_string(good) + "/" + std::to_string(kRecoverySeeds) + " seeds pass (mae/min corr:" + per_seed +
              "); eta corr > " + fmt("%.1f", kEtaCorr) + " at true parameters in " + std::to_string(good_at_truth) +
              "/" + std::to_string(kRecoverySeeds) + " seeds, " + fmt("%.1f s", secs)};
}

Outcome fuzzification_invariants() {
  const auto tree = firt::TreeSpec::builtin("fig3-linear");
  long cells = 0, bad = 0, median_cells = 0, median_bad = 0;
  for (std::uint64_t seed : {31u, 32u, 33u}) {
    const auto cfg = firt::simulate::default_config(tree, 151, 12, seed);
    const auto sim = firt::simulate::simulate(cfg);
    firt::WarningCapture quiet;
    const auto fit = firt::irtree::fit(tree, sim.ratings);
    const auto d = firt::fuzzify::fuzzify_all(fit, tree, sim.ratings, sim.times);
    for (int i = 0; i < sim.ratings.n_raters(); ++i)
      for (int j = 0; j < sim.ratings.n_items(); ++j) {
        ++cells;
        const bool bounds_ok = (1.0 <= d.L(i, j) && d.L(i, j) < d.C(i, j) && d.C(i, j) < d.R(i, j) &&
                                d.R(i, j) <= 4.0) ||
                               d.degenerate(i, j);
        const bool omega_ok = d.W(i, j) > 0.0 && d.W(i, j) < 2.0;
        if (!bounds_ok || !omega_ok) ++bad;
      }
    // 151 present times per item: the median is an observed time.
    for (int j = 0; j < sim.ratings.n_items(); ++j) {
      std::vector<double> col(sim.times.values.col(j).data(), sim.times.values.col(j).data() + 151);
      const double med = firt::stats::median(col);
      for (int i = 0; i < 151; ++i) {
        if (sim.times.values(i, j) != med) continue;
        ++median_cells;
        if (d.W(i, j) != 1.0) ++median_bad;
      }
    }
  }
  const bool ok = bad == 0 && median_bad == 0 && median_cells > 0;
  return {ok ? Verdict::kPass : Verdict::kFail,
          std::to_string(cells - bad) + "/" + std::to_string(cells) + " cells valid, " +
              std::to_string(median_cells - median_bad) + "/" + std::to_string(median_cells) +
              " median-time cells with omega == 1"};
}

Outcome inaccuracy_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 gen(555);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst_beta = 0.0, worst_s2 = 0.0, worst_pm = 0.0, worst_dec = 0.0;
  int not_converged = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const int n = 40 + rep % 80;
    std::vector<double> x(n), crisp(n);
    std::vector<std::string> g(n);
    std::vector<Fptfn> fuzzy, points;
    for (int i = 0; i < n; ++i) {
      x[i] = nd(gen);
      g[i] = u(gen) < 0.5 ? "a" : "b";
      const double c = 1.0 + 3.0 * u(gen) + 0.3 * x[i];
      const double l = c - 0.01 - 1.5 * u(gen);
      const double r = c + 0.01 + 1.5 * u(gen);
      fuzzy.emplace_back(l, c, r, 0.1 + 1.9 * u(gen));
      crisp[i] = c;
      points.push_back(Fptfn::crisp(c));
    }
    rg::Covariate cx{"x", rg::Covariate::Kind::kNumeric, x, {}, {}, {}};
    rg::Covariate cg{"g", rg::Covariate::Kind::kCategorical, {}, g, {"a", "b"}, "a"};
    const auto design = rg::make_design({cx, cg});
    firt::WarningCapture quiet;
    const auto a = rg::fit_fuzzy_normal(fuzzy, design, 0.05, rg::FuzzyMethod::kClosedForm);
    const auto b = rg::fit_fuzzy_normal(fuzzy, design, 0.05, rg::FuzzyMethod::kNumeric);
    if (!b.converged) ++not_converged;
    worst_beta = std::max(worst_beta, (a.beta - b.beta).cwiseAbs().maxCoeff());
    worst_s2 = std::max(worst_s2, std::abs(a.sigma2 - b.sigma2));

    const auto pn = rg::fit_normal(crisp, design);
    const auto pf = rg::fit_fuzzy_normal(points, design);
    worst_pm = std::max({worst_pm, (pn.beta - pf.beta).cwiseAbs().maxCoeff(), std::abs(pn.sigma2 - pf.sigma2)});

    double mse = 0.0, var = 0.0;
    for (int i = 0; i < n; ++i) {
      const auto m = firt::moments(fuzzy[static_cast<std::size_t>(i)]);
      const double res = m.mean - design.X.row(i).dot(a.beta);
      mse += res * res;
      var += m.variance;
    }
    worst_dec = std::max(worst_dec, std::abs(a.sigma2 - (mse + var) / n));
  }
  const double secs = seconds_since(t0);
  const bool ok = worst_beta <= kBetaAgree && worst_s2 <= kSigma2Agree && worst_pm <= kPointMassTol &&
                  worst_dec <= kDecompositionTol && not_converged == 0 && secs < kInaccuracySeconds;
  return {ok ? Verdict::kPass : Verdict::kFail,
          "beta " + fmt("%.2e", worst_beta) + ", sigma2 " + fmt("%.2e", worst_s2) + ", point mass " +
              fmt("%.2e", worst_pm) + ", decomposition " + fmt("%.2e", worst_dec) + ", numeric non-converged " +
              std::to_string(not_converged) + ", " + fmt("%.1f s", secs)};
}

Outcome crisp_models() {
  std::mt19937_64 gen(808);
  std::normal_distribution<double> nd;
  double worst = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    const int n = 20 + rep;
    std::vector<double> a(n), b(n), y(n);
    for (int i = 0; i < n; ++i) {
      a[i] = nd(gen);
      b[i] = 10.0 * nd(gen);
      y[i] = 3.0 * nd(gen);
    }
    const auto design = rg::make_design({{"a", rg::Covariate::Kind::kNumeric, a, {}, {}, {}},
                                         {"b", rg::Covariate::Kind::kNumeric, b, {}, {}, {}}});
    const auto fit = rg::fit_normal(y, design);
    const auto beta = oracle::normal_equations(design.X, Eigen::Map<const Eigen::VectorXd>(y.data(), n));
    for (int k = 0; k < 3; ++k) worst = std::max(worst, std::abs(fit.beta[k] - beta[k]) / std::max(1.0, std::abs(beta[k])));
  }

  const Eigen::Vector3d truth(1.0, -0.5, 2.0);
  int covered = 0, total = 0;
  for (int rep = 0; rep < kCoverageReps; ++rep) {
    const int n = 60;
    std::vector<double> a(n), b(n), y(n);
    for (int i = 0; i < n; ++i) {
      a[i] = nd(gen);
      b[i] = nd(gen);
      y[i] = truth[0] + truth[1] * a[i] + truth[2] * b[i] + 1.5 * nd(gen);
    }
    const auto design = rg::make_design({{"a", rg::Covariate::Kind::kNumeric, a, {}, {}, {}},
                                         {"b", rg::Covariate::Kind::kNumeric, b, {}, {}, {}}});
    const auto fit = rg::fit_normal(y, design, 0.05);
    for (int k = 0; k < 3; ++k) {
      ++total;
      if (fit.ci(k, 0) <= truth[k] && truth[k] <= fit.ci(k, 1)) ++covered;
    }
  }
  const double coverage = static_cast<double>(covered) / total;
  const bool ok = worst <= kNormalEqTol && coverage >= kCoverageMin;
  return {ok ? Verdict::kPass : Verdict::kFail,
          "max rel diff vs normal equations " + fmt("%.2e", worst) + ", 95% CI coverage " + fmt("%.3f", coverage)};
}

Outcome external_data() {
  const char* dir = std::getenv("FIRT_DASS_DIR");
  if (dir == nullptr || *dir == '\0') {
    return {Verdict::kUnverified, "set FIRT_DASS_DIR to a directory holding the case-study files in the generic layout"};
  }
  firt::pipeline::PipelineConfig cfg;
  const fs::path d(dir);
  cfg.ratings_csv = d / "ratings.csv";
  cfg.times_csv = d / "times.csv";
  cfg.covariates_csv = d / "covariates.csv";
  cfg.schema_json = d / "schema.json";
  cfg.out_dir = fs::temp_directory_path() / "firt_acceptance_dass";
  if (const char* off = std::getenv("FIRT_DASS_RATING_OFFSET")) cfg.rating_offset = std::atoi(off);
  cfg.models = {"normal", "lognormal", "fuzzy"};
  const auto res = firt::pipeline::run_pipeline(cfg);
  if (res.exit_code != 0 && res.exit_code != 3) return {Verdict::kFail, "pipeline failed: " + res.error};
  const auto fits = nlohmann::json::parse(firt::io::read_text(cfg.out_dir / "fits.json"));
  auto coef = [&](int model, const std::string& label) {
    const auto fit = firt::io::regression_fit_from_json(fits["models"][model]["fit"]);
    for (std::size_t k = 0; k < fit.labels.size(); ++k)
      if (fit.labels[k] == label) return fit.beta[static_cast<Eigen::Index>(k)];
    return std::nan("");
  };
  auto r2 = [&](int model) { return fits["models"][model]["fit"]["pseudo_r2"].get<double>(); };
  const double conc = 100.0 * fits["omega_concentration"].get<double>();
  const bool ok = std::abs(coef(0, "(Intercept)") - 4.204) <= 0.05 &&
                  std::abs(coef(0, "emotional_stability") + 0.232) <= 0.05 &&
                  std::abs(coef(2, "(Intercept)") - 3.383) <= 0.15 && coef(2, "emotional_stability") < 0.0 &&
                  std::abs(r2(0) - 0.507) <= 0.1 && std::abs(r2(1) - 0.199) <= 0.1 &&
                  std::abs(r2(2) - 0.304) <= 0.1 && std::abs(conc - 21.25) <= 5.0;
  return {ok ? Verdict::kPass : Verdict::kFail,
          "normal intercept " + fmt("%.3f", coef(0, "(Intercept)")) + ", es " +
              fmt("%.3f", coef(0, "emotional_stability")) + ", fuzzy intercept " +
              fmt("%.3f", coef(2, "(Intercept)")) + ", R2 " + fmt("%.3f", r2(0)) + "/" + fmt("%.3f", r2(1)) + "/" +
              fmt("%.3f", r2(2)) + ", omega conc " + fmt("%.2f%%", conc)};
}

Outcome determinism() {
  const auto base = fs::temp_directory_path() / "firt_acceptance_determinism";
  fs::remove_all(base);
  firt::WarningCapture quiet;
  if (firt::pipeline::run_simulate(base / "data", "fig3-linear", 160, 14, 7).exit_code != 0) {
    return {Verdict::kFail, "simulation failed"};
  }
  firt::pipeline::PipelineConfig cfg;
  cfg.ratings_csv = base / "data" / "ratings.csv";
  cfg.times_csv = base / "data" / "times.csv";
  cfg.covariates_csv = base / "data" / "covariates.csv";
  cfg.schema_json = base / "data" / "schema.json";
  cfg.seed = 7;
  cfg.out_dir = base / "run1";
  const auto a = firt::pipeline::run_pipeline(cfg);
  cfg.out_dir = base / "run2";
  cfg.threads = 3;  // worker count must not change the numbers
  const auto b = firt::pipeline::run_pipeline(cfg);
  if (a.exit_code != 0 || b.exit_code != 0) return {Verdict::kFail, "pipeline failed: " + a.error + b.error};
  int same = 0, differ = 0;
  for (const auto& f : a.files) {
    if (f == "manifest.json") continue;  // echoes the output directory and thread count
    (firt::io::read_text(base / "run1" / f) == firt::io::read_text(base / "run2" / f) ? same : differ)++;
  }
  cfg.threads = 1;
  cfg.out_dir = base / "run3";
  firt::pipeline::run_pipeline(cfg);
  cfg.out_dir = base / "run1";
  const auto manifest1 = firt::io::read_text(base / "run1" / "manifest.json");
  firt::pipeline::run_pipeline(cfg);
  const bool manifest_same = firt::io::read_text(base / "run1" / "manifest.json") == manifest1;
  for (const auto& f : a.files) {
    if (f == "manifest.json") continue;
    if (firt::io::read_text(base / "run1" / f) != firt::io::read_text(base / "run3" / f)) ++differ;
  }
  const bool ok = differ == 0 && manifest_same && same == static_cast<int>(a.files.size()) - 1;
  return {ok ? Verdict::kPass : Verdict::kFail,
          std::to_string(same) + " files identical across runs and thread counts, " + std::to_string(differ) +
              " differ, manifest " + (manifest_same ? "identical" : "differs") + " on rerun"};
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"1 membership correctness", membership_correctness},
      {"2 probability coherence", probability_coherence},
      {"3 IRTree recovery", irtree_recovery},
      {"4 fuzzification invariants", fuzzification_invariants},
      {"5 inaccuracy oracle", inaccuracy_oracle},
      {"6 crisp-model correctness", crisp_models},
      {"7 external-data check", external_data},
      {"8 determinism", determinism},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {Verdict::kFail, std::string("exception: ") + e.what()};
    }
    const char* tag = o.verdict == Verdict::kPass ? "PASS" : o.verdict == Verdict::kFail ? "FAIL" : "UNVERIFIED";
    std::printf("criterion %-30s %-10s %s\n", name, tag, o.detail.c_str());
    std::fflush(stdout);
    if (o.verdict == Verdict::kFail) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
