#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "firt/data.hpp"
#include "firt/fuzzify.hpp"
#include "firt/irtree.hpp"
#include "firt/regress.hpp"
#include "firt/simulate.hpp"

namespace firt::io {

namespace fs = std::filesystem;

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

// RFC-4180-style reader (quoted fields, doubled quotes). Throws InputError for
// a missing or empty file and for rows whose width differs from the header.
CsvTable read_csv(const fs::path& path);
CsvTable parse_csv(const std::string& text, const std::string& origin = "<memory>");

// Shortest round-trip representation; NaN renders as "NA".
std::string format_full(double v);
// Fixed three decimals.
std::string format3(double v);

void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);

enum class FileRole { kRatings, kTimes, kCovariates };

// Hook applied to each raw table before it is interpreted, e.g. to rename
// columns or recode a vendor-specific export into the generic layout.
using IngestAdapter = std::function<void(CsvTable&, FileRole)>;

struct IngestOptions {
  int rating_offset = 0;  // added to every rating, e.g. 1 for 0-based scales
  IngestAdapter adapter;
};

struct IngestReport {
  int ratings_malformed = 0;
  int times_malformed = 0;
  int covariates_malformed = 0;
};

struct Dataset {
  std::vector<std::string> rater_ids;
  std::vector<std::string> item_names;
  RatingMatrix ratings;
  ResponseTimeMatrix times;
  std::vector<regress::Covariate> covariates;
  // Rows whose covariates are all present.
  std::vector<bool> covariates_complete;
  IngestReport report;
};

// Wide matrix files: header "rater_id,<item>...", one row per rater.
// Unparseable or out-of-range cells become missing and are counted (with a
// warning per file).
RatingMatrix parse_ratings(const CsvTable& table, int rating_offset, int* malformed);
ResponseTimeMatrix parse_times(const CsvTable& table, int* malformed);

// Covariate schema (JSON sidecar):
// {"covariates": [
//   {"name": "religiousness", "type": "categorical", "levels": ["No","Yes"], "reference": "No"},
//   {"name": "age", "type": "numeric"},
//   {"name": "emotional_stability", "type": "alpha_composite", "items": ["es1","es2"]}]}
// alpha_composite columns are built from the named item columns weighted by
// their Cronbach's alpha.
std::vector<regress::Covariate> parse_covariates(const CsvTable& table, const nlohmann::json& schema,
                                                 std::vector<bool>* complete, int* malformed);

// Reads and aligns the three files. Throws InputError for empty files or when
// the files disagree in row count or rater ids.
Dataset ingest(const fs::path& ratings_csv, const fs::path& times_csv,
               const fs::path& covariates_csv, const fs::path& schema_json,
               const IngestOptions& options = {});

void write_ratings(const fs::path& path, const std::vector<std::string>& ids,
                   const std::vector<std::string>& items, const RatingMatrix& ratings);
void write_matrix(const fs::path& path, const std::vector<std::string>& ids,
                  const std::vector<std::string>& items, const Eigen::MatrixXd& values);

std::vector<std::string> default_ids(int n, const std::string& prefix);

nlohmann::json to_json(const irtree::IrtreeFit& fit, const TreeSpec& tree);
irtree::IrtreeFit irtree_fit_from_json(const nlohmann::json& j);

nlohmann::json to_json(const simulate::SimTruth& truth);

nlohmann::json to_json(const regress::RegressionFit& fit);
regress::RegressionFit regression_fit_from_json(const nlohmann::json& j);

// Writes C.csv, L.csv, R.csv, W.csv and composite.csv (rater_id,l,c,r,omega)
// into dir.
void write_fuzzy_dataset(const fs::path& dir, const std::vector<std::string>& ids,
                         const std::vector<std::string>& items, const fuzzify::FuzzyDataset& data);
fuzzify::FuzzyDataset read_fuzzy_dataset(const fs::path& dir, std::vector<std::string>* ids = nullptr,
                                         std::vector<std::string>* items = nullptr);

// Composite CSV alone, keyed by rater id.
struct CompositeRecord {
  std::string rater_id;
  Fptfn value;
};
std::vector<CompositeRecord> read_composite(const fs::path& path);

}  // namespace firt::io
