#include "doctest.h"

#include <fstream>
#include <set>
#include <sstream>

#include "firt/diagnostics.hpp"
#include "firt/io.hpp"
#include "firt/pipeline.hpp"

namespace fs = std::filesystem;
namespace io = firt::io;
namespace pl = firt::pipeline;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("firt_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

pl::PipelineConfig config_for(const fs::path& data, const fs::path& out) {
  pl::PipelineConfig c;
  c.ratings_csv = data / "ratings.csv";
  c.times_csv = data / "times.csv";
  c.covariates_csv = data / "covariates.csv";
  c.schema_json = data / "schema.json";
  c.out_dir = out;
  c.seed = 7;
  return c;
}

std::vector<std::vector<std::string>> read_tsv(const fs::path& p) {
  std::istringstream is(io::read_text(p));
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(is, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, '\t')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST_CASE("csv parsing") {
  const auto t = io::parse_csv("a,b,c\n1,\"x,y\",\"he said \"\"hi\"\"\"\n\n2,,3\n");
  CHECK(t.header == std::vector<std::string>{"a", "b", "c"});
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0][1] == "x,y");
  CHECK(t.rows[0][2] == "he said \"hi\"");
  CHECK(t.rows[1][1].empty());
  CHECK_THROWS_AS(io::parse_csv(""), firt::InputError);
  CHECK_THROWS_AS(io::parse_csv("a,b\n1\n"), firt::InputError);
  CHECK_THROWS_AS(io::read_csv("/nonexistent/file.csv"), firt::InputError);
}

TEST_CASE("number formatting") {
  CHECK(io::format_full(0.1) == "0.1");
  CHECK(io::format_full(std::nan("")) == "NA");
  CHECK(std::stod(io::format_full(1.0 / 3.0)) == 1.0 / 3.0);
  CHECK(io::format3(4.2036) == "4.204");
  CHECK(io::format3(-0.0001) == "0.000");
}

TEST_CASE("ingest aligns the three files") {
  const auto dir = scratch("ingest");
  REQUIRE(pl::run_simulate(dir, "fig3-linear", 160, 14, 3).exit_code == 0);
  const auto d = io::ingest(dir / "ratings.csv", dir / "times.csv", dir / "covariates.csv", dir / "schema.json");
  CHECK(d.ratings.n_raters() == 160);
  CHECK(d.ratings.n_items() == 14);
  CHECK(d.times.values.rows() == 160);
  CHECK(d.covariates.size() == 3);
  CHECK(d.rater_ids.size() == 160);

  // One malformed cell becomes missing with a warning.
  auto text = io::read_text(dir / "ratings.csv");
  const auto pos = text.find('\n') + 1;
  const auto comma = text.find(',', pos);
  text.replace(comma + 1, 1, "x");
  io::write_text(dir / "ratings.csv", text);
  firt::WarningCapture capture;
  const auto e = io::ingest(dir / "ratings.csv", dir / "times.csv", dir / "covariates.csv", dir / "schema.json");
  CHECK(e.ratings.missing(0, 0));
  CHECK(e.report.ratings_malformed == 1);
  CHECK(capture.messages().size() == 1);

  // Row-count mismatch is fatal.
  auto times = io::read_text(dir / "times.csv");
  times.erase(times.rfind('\n', times.size() - 2) + 1);
  io::write_text(dir / "times.csv", times);
  CHECK_THROWS_AS(io::ingest(dir / "ratings.csv", dir / "times.csv", dir / "covariates.csv", dir / "schema.json"),
                  firt::InputError);

  io::write_text(dir / "empty.csv", "");
  CHECK_THROWS_AS(io::ingest(dir / "empty.csv", dir / "times.csv", dir / "covariates.csv", dir / "schema.json"),
                  firt::InputError);
}

TEST_CASE("alpha composite covariate from the schema") {
  const auto t = io::parse_csv("rater_id,a,b\nr1,1,2\nr2,2,3\nr3,4,4\n");
  const json schema = json::parse(R"({"covariates":[{"name":"es","type":"alpha_composite","items":["a","b"]}]})");
  std::vector<bool> complete;
  int malformed = 0;
  const auto covs = io::parse_covariates(t, schema, &complete, &malformed);
  REQUIRE(covs.size() == 1);
  Eigen::MatrixXd items(3, 2);
  items << 1, 2, 2, 3, 4, 4;
  const auto want = firt::regress::alpha_composite(items, firt::regress::cronbach_alpha(items));
  for (int i = 0; i < 3; ++i) CHECK(covs[0].numeric[static_cast<std::size_t>(i)] == doctest::Approx(want[i]));
}

TEST_CASE("simulated bundle") {
  const auto data = scratch("bundle_data");
  const auto out = scratch("bundle_out") / "run";
  REQUIRE(pl::run_simulate(data, "fig3-linear", 160, 14, 7).exit_code == 0);
  const auto cfg = config_for(data, out);
  const auto res = pl::run_pipeline(cfg);
  CHECK(res.exit_code == 0);
  CHECK(res.error.empty());

  const std::set<std::string> expected = {
      "times_trimmed.csv", "ratings_used.csv", "irtree_fit.json", "C.csv",   "L.csv",
      "R.csv",             "W.csv",            "composite.csv",   "fits.json", "coefficients.tsv",
      "summary.tsv",       "report.txt",       "hist_centers.tsv", "hist_left_spreads.tsv",
      "hist_right_spreads.tsv", "hist_omega.tsv", "fitted_lines.tsv", "manifest.json"};
  for (const auto& f : expected) CHECK_MESSAGE(fs::exists(out / f), f);

  const auto manifest = json::parse(io::read_text(out / "manifest.json"));
  CHECK(manifest["status"] == "ok");
  CHECK(manifest["seed"] == 7);
  CHECK(manifest["config"] == cfg.to_json());
  CHECK(json::parse(manifest.dump()) == manifest);
  std::set<std::string> listed;
  for (const auto& f : manifest["files"]) listed.insert(f.get<std::string>());
  CHECK(listed == expected);

  // The machine table holds exactly the fitted numbers.
  const auto fits = json::parse(io::read_text(out / "fits.json"));
  const auto rows = read_tsv(out / "coefficients.tsv");
  std::size_t r = 1;
  for (const auto& m : fits["models"]) {
    const auto fit = io::regression_fit_from_json(m["fit"]);
    for (Eigen::Index k = 0; k < fit.beta.size(); ++k, ++r) {
      REQUIRE(r < rows.size());
      CHECK(rows[r][0] == m["name"].get<std::string>());
      CHECK(std::stod(rows[r][2]) == fit.beta[k]);
      CHECK(std::stod(rows[r][3]) == fit.se[k]);
      CHECK(std::stod(rows[r][4]) == fit.ci(k, 0));
      CHECK(std::stod(rows[r][5]) == fit.ci(k, 1));
    }
  }
  CHECK(r == rows.size());

  // Two binary factors give four fitted lines per model.
  std::set<std::string> groups;
  for (const auto& row : read_tsv(out / "fitted_lines.tsv")) {
    if (row[0] == "fuzzy") groups.insert(row[1]);
  }
  CHECK(groups.size() == 4);

  for (const char* h : {"hist_centers.tsv", "hist_omega.tsv"}) {
    const auto bins = read_tsv(out / h).size() - 1;
    CHECK(bins >= 10);
    CHECK(bins <= 15);
  }

  // Stage commands reproduce the pipeline outputs from files.
  const auto staged = scratch("bundle_staged");
  auto sc = cfg;
  sc.out_dir = staged;
  REQUIRE(pl::run_fit_irtree([&] {
            auto c = sc;
            c.ratings_csv = out / "ratings_used.csv";
            return c;
          }()).exit_code == 0);
  CHECK(io::read_text(staged / "irtree_fit.json") == io::read_text(out / "irtree_fit.json"));
  REQUIRE(pl::run_fuzzify(sc, staged / "irtree_fit.json").exit_code == 0);
  CHECK(io::read_text(staged / "composite.csv") == io::read_text(out / "composite.csv"));
  REQUIRE(pl::run_report(out / "fits.json", out / "composite.csv", staged).exit_code == 0);
  CHECK(io::read_text(staged / "report.txt") == io::read_text(out / "report.txt"));
}

TEST_CASE("W override feeds unit omegas to the regression") {
  const auto data = scratch("wones_data");
  REQUIRE(pl::run_simulate(data, "fig3-linear", 60, 6, 4).exit_code == 0);
  auto cfg = config_for(data, scratch("wones_out"));
  cfg.unit_intensification = true;
  cfg.models = {"fuzzy", "fuzzy-w1"};
  REQUIRE(pl::run_pipeline(cfg).exit_code == 0);
  for (const auto& rec : io::read_composite(cfg.out_dir / "composite.csv")) CHECK(rec.value.omega() == 1.0);
  const auto fits = json::parse(io::read_text(cfg.out_dir / "fits.json"));
  CHECK(fits["models"][0]["fit"]["beta"] == fits["models"][1]["fit"]["beta"]);
  CHECK(fits["omega_concentration"] == 1.0);
}

TEST_CASE("failures leave a partial bundle") {
  const auto data = scratch("fail_data");
  REQUIRE(pl::run_simulate(data, "fig3-linear", 40, 5, 1).exit_code == 0);
  auto cfg = config_for(data, scratch("fail_out"));
  cfg.models = {"normal", "bogus"};
  const auto res = pl::run_pipeline(cfg);
  CHECK(res.exit_code == pl::kInputError);
  const auto manifest = json::parse(io::read_text(cfg.out_dir / "manifest.json"));
  CHECK(manifest["status"] == "failed");
  CHECK(manifest["failed_stage"] == "regress");
  CHECK(fs::exists(cfg.out_dir / "composite.csv"));

  cfg.ratings_csv = data / "missing.csv";
  CHECK(pl::run_pipeline(cfg).exit_code == pl::kInputError);

  cfg = config_for(data, scratch("fail_tree"));
  cfg.tree = "fig2a";  // ratings go up to 4
  CHECK(pl::run_pipeline(cfg).exit_code == pl::kInputError);
}

TEST_CASE("plot data edge cases") {
  const auto dir = scratch("plots");
  const std::vector<firt::Fptfn> same(5, firt::Fptfn(1.5, 2.0, 3.0, 1.1));
  json empty;
  empty["models"] = json::array();
  const auto files = pl::emit_plot_data(dir, same, empty);
  CHECK(files.size() == 4);
  CHECK(!fs::exists(dir / "fitted_lines.tsv"));
  for (const auto& f : files) {
    const auto rows = read_tsv(dir / f);
    REQUIRE(rows.size() == 2);
    CHECK(rows[1][2] == "5");
  }
  const auto h = pl::histogram({1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12});
  CHECK(h.counts.size() == 10);
  int total = 0;
  for (int c : h.counts) total += c;
  CHECK(total == 12);
  CHECK(pl::omega_concentration(same) == 0.0);
}

TEST_CASE("fuzzy dataset files round trip") {
  const auto data = scratch("rt_data");
  REQUIRE(pl::run_simulate(data, "fig3-linear", 30, 4, 2).exit_code == 0);
  auto cfg = config_for(data, scratch("rt_out"));
  cfg.models.clear();
  REQUIRE(pl::run_pipeline(cfg).exit_code == 0);
  std::vector<std::string> ids, items;
  const auto fz = io::read_fuzzy_dataset(cfg.out_dir, &ids, &items);
  CHECK(ids.size() == 30);
  CHECK(items.size() == 4);
  const auto again = scratch("rt_again");
  io::write_fuzzy_dataset(again, ids, items, fz);
  for (const char* f : {"C.csv", "L.csv", "R.csv", "W.csv", "composite.csv"}) {
    CHECK(io::read_text(again / f) == io::read_text(cfg.out_dir / f));
  }
  CHECK(!fs::exists(cfg.out_dir / "fitted_lines.tsv"));
}
