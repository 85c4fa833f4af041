#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "homent/covariance_estimators.hpp"
#include "homent/estimators.hpp"
#include "homent/inference.hpp"
#include "homent/shock_dgps.hpp"
#include "homent/var_model.hpp"
#include "json.hpp"

namespace homent {

inline constexpr int kScenarioSchemaVersion = 1;

/// Joint restriction tested in every replication.
struct TestSpec {
  std::string name;
  Restriction restriction;
};

/// Wald tests of H0: b_{row,col} = b over a grid of b.
struct PowerCurveSpec {
  Eigen::Index row = 0;  // zero-based
  Eigen::Index col = 0;
  std::vector<double> grid;
};

/// Loss of the moment conditions at the true B0 for several weightings.
struct LossCurveSpec {
  std::vector<Eigen::Index> sample_sizes;
  int replications = 500;
};

struct Scenario {
  std::string name;
  Eigen::MatrixXd B0;
  ShockModel shocks;
  std::optional<VarSpec> var;  // B0 of the VarSpec equals the scenario B0
  Eigen::Index burn_in = kDefaultBurnIn;
  std::vector<Eigen::Index> sample_sizes;
  int replications = 1;
  std::vector<EstimatorKind> estimators;
  std::vector<Basis> bases;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> coefficients;  // zero-based, summarized
  std::vector<TestSpec> tests;
  std::optional<PowerCurveSpec> power_curve;
  std::optional<LossCurveSpec> loss_curve;
  double level = 0.90;
  std::uint64_t seed = 1;
  nlohmann::json source;  // normalized input, hashed into the manifest

  Eigen::Index dim() const { return B0.rows(); }
};

ShockDistribution shock_from_json(const nlohmann::json& j);
nlohmann::json shock_to_json(const ShockDistribution& d);

/// {"name", "coefficients": "all" | "upper" | [[row, col], ...] (one-based),
///  "values": "B0" | number | [numbers]}. "B0" needs a non-null B0.
TestSpec test_from_json(const nlohmann::json& j, Eigen::Index n, const Eigen::MatrixXd* B0 = nullptr);

/// Parses and validates a scenario; unknown keys are rejected.
Scenario scenario_from_json(const nlohmann::json& j);
Scenario load_scenario(const std::filesystem::path& path);

/// FNV-1a 64-bit hash of the canonical dump of the scenario.
std::uint64_t scenario_hash(const Scenario& sc);

/// Coefficient label such as "b41" (one-based, "b10_2" style when n > 9).
std::string coefficient_label(Eigen::Index row, Eigen::Index col, Eigen::Index n);

/// Column names of records.csv for a scenario.
std::vector<std::string> record_columns(const Scenario& sc);

/// One replication's reduced-form shocks (after the VAR step when present).
ShockPanel replication_panel(const Scenario& sc, Eigen::Index T, int rep);

/// Everything needed per replication that does not depend on the data.
struct ScenarioContext {
  MomentSystem sys;
  MomentEvaluator ev;
  Eigen::MatrixXd S_true;
  Eigen::MatrixXd V_true;  // efficient covariance at B0, used for normalization

  explicit ScenarioContext(const Scenario& sc);
};

/// records.csv rows (cells in record_columns order) for one replication.
std::vector<std::vector<std::string>> run_replication(const Scenario& sc, const ScenarioContext& ctx, Eigen::Index T,
                                                      int rep, const std::vector<EstimatorKind>& estimators,
                                                      std::vector<double>* wall_ms = nullptr);

struct RunOptions {
  std::filesystem::path out_dir;
  unsigned threads = 0;  // 0: hardware concurrency
  bool resume = true;
  bool quiet = true;
};

struct RunSummary {
  std::size_t records = 0;
  std::size_t computed = 0;  // records produced by this invocation
  std::size_t failures = 0;
  std::vector<std::string> warnings;
};

/// Runs every (T, replication) task, writes records.csv in canonical order,
/// summary_<kind>.csv, manifest.json and timings.csv.
RunSummary run_scenario(const Scenario& sc, const RunOptions& opt);

/// Parsed records file.
struct RecordTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;
  std::optional<std::size_t> find(const std::string& name) const;
};

RecordTable read_records(const std::filesystem::path& file);

/// A summary table as CSV cells.
struct SummaryTable {
  std::string kind;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

inline const std::vector<std::string>& summary_kinds() {
  static const std::vector<std::string> kinds{"variance_quantiles", "coef_stats", "coverage", "rejection", "power_curve"};
  return kinds;
}

/// Builds one summary table from records alone. Throws InvalidArgument for
/// empty input or an unknown kind.
SummaryTable summarize(const Scenario& sc, const RecordTable& records, const std::string& kind);

void write_csv(const std::filesystem::path& file, const std::vector<std::string>& columns,
               const std::vector<std::vector<std::string>>& rows);

/// Quantile with linear interpolation between order statistics.
double quantile(std::vector<double> values, double p);

/// Mean and quantiles of g_T(B0)' W g_T(B0) per sample size.
struct LossCurvePoint {
  Eigen::Index T = 0;
  std::string weighting;  // true | si | smi
  double mean = 0.0;
  double q10 = 0.0;
  double q90 = 0.0;
};

std::vector<LossCurvePoint> loss_at_truth(const Scenario& sc, const LossCurveSpec& spec, unsigned threads = 1);

/// "%.17g" text of a double, "NA" for non-finite values.
std::string format_number(double v);

}  // namespace homent
