#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "homent/errors.hpp"
#include "homent/mc_harness.hpp"

using namespace homent;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json small_scenario(int replications) {
  return {{"name", "unit"},
          {"B0", {{10, 0}, {5, 10}}},
          {"shocks", {{"kind", "gaussian_mixture"}}},
          {"sample_sizes", {150, 250}},
          {"replications", replications},
          {"estimators", {"gmm_star", "gmm2", "csue2"}},
          {"tests", {{{"name", "h0_full"}}, {{"name", "h0_b12"}, {"coefficients", {{1, 2}}}, {"values", 0}}}},
          {"power_curve", {{"coefficient", {2, 1}}, {"grid", {3, 5, 7}}}},
          {"seed", 11}};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("homent_mc_" + name);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("scenario parsing") {
  const Scenario sc = scenario_from_json(small_scenario(2));
  CHECK(sc.dim() == 2);
  CHECK(sc.bases.size() == 2);
  CHECK(sc.coefficients.size() == 4);
  REQUIRE(sc.tests.size() == 2);
  CHECK(sc.tests[0].restriction.R.rows() == 4);
  CHECK(sc.tests[0].restriction.r(1) == 5.0);
  CHECK(sc.tests[1].restriction.R(0, 2) == 1.0);
  CHECK(sc.level == 0.90);

  json bad = small_scenario(2);
  bad["replicates"] = 3;
  CHECK_THROWS_AS(scenario_from_json(bad), InvalidArgument);
  bad = small_scenario(2);
  bad["estimators"] = {"gmm7"};
  CHECK_THROWS_AS(scenario_from_json(bad), InvalidArgument);
  bad = small_scenario(0);
  CHECK_THROWS_AS(scenario_from_json(bad), InvalidArgument);
  bad = small_scenario(2);
  bad["shocks"] = {{"kind", "student_t"}, {"dof", 9}, {"scale", 2}};
  CHECK_THROWS_AS(scenario_from_json(bad), InvalidArgument);
  bad = small_scenario(2);
  bad["B0"] = {{1, 2}, {2, 4}};
  CHECK_THROWS(scenario_from_json(bad));
  CHECK(scenario_hash(sc) != scenario_hash(scenario_from_json(small_scenario(3))));
}

TEST_CASE("bundled scenarios parse") {
  for (const auto& entry : fs::directory_iterator(fs::path(HOMENT_SOURCE_DIR) / "scenarios")) {
    CAPTURE(entry.path().string());
    CHECK_NOTHROW(load_scenario(entry.path()));
  }
}

TEST_CASE("record layout") {
  const Scenario sc = scenario_from_json(small_scenario(1));
  const auto cols = record_columns(sc);
  for (const char* c : {"scenario", "T", "rep", "estimator", "converged", "b21_hat", "var_e1", "cover_b21_smi",
                        "reject_h0_full_si", "reject_b21_eq5_smi"})
    CHECK(std::find(cols.begin(), cols.end(), c) != cols.end());
  CHECK(coefficient_label(3, 0, 4) == "b41");
  CHECK(coefficient_label(9, 1, 12) == "b10_2");
}

TEST_CASE("one replication yields one record per sample size and estimator") {
  const Scenario sc = scenario_from_json(small_scenario(1));
  const fs::path dir = scratch("smoke");
  const RunSummary s = run_scenario(sc, {dir, 1, true, true});
  CHECK(s.records == 6);
  const RecordTable t = read_records(dir / "records.csv");
  CHECK(t.rows.size() == 6);
  for (const auto& kind : summary_kinds()) CHECK(fs::exists(dir / ("summary_" + kind + ".csv")));
  const json manifest = json::parse(slurp(dir / "manifest.json"));
  CHECK(manifest.at("status") == "complete");
  CHECK(manifest.at("records") == 6);
  fs::remove_all(dir);
}

TEST_CASE("records do not depend on the thread count") {
  const Scenario sc = scenario_from_json(small_scenario(5));
  const fs::path a = scratch("threads1"), b = scratch("threads3");
  run_scenario(sc, {a, 1, true, true});
  run_scenario(sc, {b, 3, true, true});
  CHECK(slurp(a / "records.csv") == slurp(b / "records.csv"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("interrupted runs resume") {
  const Scenario sc = scenario_from_json(small_scenario(4));
  const fs::path full = scratch("full"), part = scratch("part");
  run_scenario(sc, {full, 1, true, true});
  run_scenario(sc, {part, 1, true, true});
  const std::string expected = slurp(full / "records.csv");
  {
    // Keep the header, seven records and half of the next line.
    std::istringstream in(expected);
    std::string line, kept;
    for (int i = 0; i < 8 && std::getline(in, line); ++i) kept += line + "\n";
    std::getline(in, line);
    kept += line.substr(0, line.size() / 2);
    std::ofstream(part / "records.csv") << kept;
  }
  const RunSummary s = run_scenario(sc, {part, 2, true, true});
  CHECK(s.computed == 24 - 7);
  CHECK(slurp(part / "records.csv") == expected);

  json other = small_scenario(4);
  other["seed"] = 12;
  CHECK_THROWS_AS(run_scenario(scenario_from_json(other), {part, 1, true, true}), InvalidArgument);
  fs::remove_all(full);
  fs::remove_all(part);
}

TEST_CASE("summaries of identical replications") {
  const Scenario sc = scenario_from_json(small_scenario(1));
  const auto rows = run_replication(sc, ScenarioContext(sc), 150, 0, {EstimatorKind::csue2});
  RecordTable t;
  t.columns = record_columns(sc);
  for (int i = 0; i < 4; ++i) t.rows.push_back(rows[0]);
  const SummaryTable coef = summarize(sc, t, "coef_stats");
  const auto iqr = std::find(coef.columns.begin(), coef.columns.end(), "iqr") - coef.columns.begin();
  const auto sd = std::find(coef.columns.begin(), coef.columns.end(), "sd") - coef.columns.begin();
  bool seen = false;
  for (const auto& r : coef.rows) {
    if (r[0] != "150" || r[1] != "csue2") continue;
    seen = true;
    CHECK(r[static_cast<std::size_t>(iqr)] == "0");
    CHECK(r[static_cast<std::size_t>(sd)] == "0");
  }
  CHECK(seen);
  const SummaryTable power = summarize(sc, t, "power_curve");
  CHECK(power.rows.size() == 2 * 3 * 2 * 3);
  CHECK_THROWS_AS(summarize(sc, RecordTable{t.columns, {}}, "coverage"), InvalidArgument);
  CHECK_THROWS_AS(summarize(sc, t, "histogram"), InvalidArgument);
}

TEST_CASE("quantiles interpolate between order statistics") {
  CHECK(quantile({4, 1, 3, 2}, 0.1) == doctest::Approx(1.3));
  CHECK(quantile({4, 1, 3, 2}, 0.5) == doctest::Approx(2.5));
  CHECK(quantile({7}, 0.9) == 7);
  CHECK(std::isnan(quantile({}, 0.5)));
}

TEST_CASE("loss at the truth approaches K / T") {
  json j = small_scenario(1);
  const Scenario sc = scenario_from_json(j);
  const auto points = loss_at_truth(sc, {{400}, 200}, 2);
  REQUIRE(points.size() == 3);
  CHECK(points[0].weighting == "true");
  CHECK(points[0].mean * 400 == doctest::Approx(8.0).epsilon(0.2));
  for (const auto& p : points) CHECK(p.q10 <= p.q90);
}

TEST_CASE("number formatting") {
  CHECK(format_number(0.1) == "0.10000000000000001");
  CHECK(format_number(std::nan("")) == "NA");
}
