#pragma once

// Experiment catalogue, run configuration, persistence, the no-training
// verification suite and the table jobs.

#include "mim/optimizer.hpp"

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace mim::harness {

using ad::Index;
using ad::Matrix;
using loss::Method;

struct CatalogueEntry {
  std::string id;
  std::string summary;
  loss::Family family;
  geo::Shape shape;
  std::vector<Method> methods;
  int min_d = 1;
  int max_d = 1 << 20;
  nn::Activation activation = nn::Activation::ReQu;
};

const std::vector<CatalogueEntry>& catalogue();
/// Throws std::invalid_argument listing the valid ids.
const CatalogueEntry& find_experiment(std::string_view id);

/// One run. Keys of the config file are the member names; see README.
struct ExperimentConfig {
  std::string experiment;
  Method method = Method::MIM;
  int d = 2;
  int n = 10;
  int m = 2;
  std::optional<nn::Activation> activation;  // catalogue default when unset
  int k = 1;                                  // periodic harmonics
  ad::Index interior = 1000;
  /// Penalty samples: boundary points, or t = 0 points for the wave slice.
  /// Negative values of boundary and lambda select the published default for the pair.
  ad::Index boundary = -1;
  double lambda = -1.0;
  std::uint64_t max_epochs = 1000;
  std::uint64_t eval_interval = 100;
  ad::Index eval_points = 10000;
  std::uint64_t seed = 1;
  double alpha = 1e-3;
  bool freeze_samples = false;
  ad::Index chunk = 256;
  std::string output = "runs/out";

  nn::Activation resolved_activation() const;
  /// Field-level checks against the catalogue; throws ConfigError.
  void validate() const;
};

class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& message);
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// key = value lines; '#' starts a comment. Unknown keys are errors.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Every key, one per line, in a form parse_config reads back.
std::string format_config(const ExperimentConfig& c);
/// Applies one key=value assignment.
void set_field(ExperimentConfig& c, std::string_view key, std::string_view value);

/// Fills in the published penalty weight and sample count for the pair
/// when the config leaves them negative.
ExperimentConfig with_defaults(ExperimentConfig c);

/// Trial, source and objective of a config.
struct Problem {
  std::unique_ptr<con::Trial> trial;
  std::unique_ptr<loss::Objective> objective;
  Matrix eval_x;
  Matrix eval_u;
};
Problem build_problem(const ExperimentConfig& c);
con::Trial build_trial(const ExperimentConfig& c);

/// Seeds of the independent streams of a run.
struct RunSeeds {
  std::uint64_t init;
  std::uint64_t eval;
  std::uint64_t sampling;
};
RunSeeds run_seeds(std::uint64_t seed);

struct RunRecord {
  ExperimentConfig config;
  std::vector<opt::EvalRow> rows;
  bool diverged = false;
  std::string message;
  std::uint64_t epochs = 0;
  double final_error = 0.0;
  double seconds = 0.0;
  std::string version;
  RunSeeds seeds{};
  std::vector<double> params;
};

/// Trains and writes <output>.curve.csv and <output>.record. The curve file
/// is written as rows arrive, so an interrupted run leaves a partial file.
RunRecord run(const ExperimentConfig& c, bool write_files = true);

/// Loads <output>.record when it finished without diverging and echoes the
/// same config; otherwise runs. `reused` reports which happened.
RunRecord run_or_resume(const ExperimentConfig& c, bool* reused = nullptr);

std::string format_record(const RunRecord& r);
RunRecord parse_record(std::string_view text);
std::string curve_header();
std::string format_row(const opt::EvalRow& r);
std::vector<opt::EvalRow> parse_curve(std::string_view text);
std::filesystem::path curve_path(const ExperimentConfig& c);
std::filesystem::path record_path(const ExperimentConfig& c);

/// Formats a double with 17 significant digits.
std::string fmt17(double x);

// Verification suite.

struct PropertyResult {
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

/// Mutations for checking that the suite can fail.
struct VerifyOptions {
  /// Flip the sign of the source term of this experiment.
  std::string flip_source;
  /// Shift the Dirichlet multiplier of the ball so it no longer vanishes.
  bool bad_dirichlet_multiplier = false;
  int draws = 20;
  ad::Index samples = 1000;
};

PropertyResult check_exactness(const VerifyOptions& o = {});
PropertyResult check_autodiff();
PropertyResult check_adam();
PropertyResult check_parameter_counts();
PropertyResult check_sources(const VerifyOptions& o = {});
PropertyResult check_periodicity();
std::vector<PropertyResult> verify(const VerifyOptions& o = {});

// Tables.

enum class Budget { Desk, Paper };
Budget parse_budget(std::string_view s);

struct TableCell {
  std::string column;
  ExperimentConfig config;
  std::string paper;  // printed value, verbatim
};

struct TableRow {
  std::vector<std::string> keys;  // values of TableSpec::key_names
  std::vector<TableCell> cells;
};

struct TableSpec {
  std::string id;
  std::string title;
  std::vector<std::string> key_names;
  std::vector<std::string> columns;
  std::vector<TableRow> rows;
};

std::vector<std::string> table_ids();
/// Rows of a table at a budget. Desk keeps d <= 4 and reduces sample counts
/// and epochs (see desk_config); Budget::Paper keeps the printed settings.
TableSpec table(std::string_view id, Budget budget);
/// Desk-scale version of a full-budget config.
ExperimentConfig desk_config(ExperimentConfig c);

struct TableResult {
  std::filesystem::path csv;
  int failed = 0;
};
/// Runs (or resumes) every cell and writes <out>/<id>.csv.
TableResult run_table(std::string_view id, Budget budget, const std::filesystem::path& out,
                      std::ostream* log = nullptr);

}  // namespace mim::harness
