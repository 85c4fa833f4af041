#include "homent/cli.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "homent/covariance_estimators.hpp"
#include "homent/errors.hpp"
#include "homent/estimators.hpp"
#include "homent/inference.hpp"
#include "homent/mc_harness.hpp"
#include "homent/noise_analytics.hpp"
#include "homent/shock_dgps.hpp"
#include "homent/var_model.hpp"
#include "homent/version.hpp"
#include "json.hpp"

namespace homent {

using nlohmann::json;
namespace fs = std::filesystem;

CsvError::CsvError(std::size_t line, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

namespace {

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
    if (comma == std::string::npos) return out;
    start = comma + 1;
  }
}

}  // namespace

CsvPanel read_csv_panel(std::istream& in) {
  CsvPanel panel;
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (trim(line).empty()) continue;
    const auto cells = split(line);
    if (panel.header.empty()) {
      for (const auto& c : cells)
        if (c.empty()) throw CsvError(lineno, "empty column name in header");
      panel.header = cells;
      continue;
    }
    if (cells.size() != panel.header.size())
      throw CsvError(lineno, "expected " + std::to_string(panel.header.size()) + " fields, found " +
                                 std::to_string(cells.size()));
    std::vector<double> row;
    for (const auto& c : cells) {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(c.data(), c.data() + c.size(), v);
      if (c.empty() || ec != std::errc() || ptr != c.data() + c.size() || !std::isfinite(v))
        throw CsvError(lineno, "non-numeric value '" + c + "'");
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  if (panel.header.empty()) throw CsvError(lineno == 0 ? 1 : lineno, "missing header row");
  if (rows.empty()) throw CsvError(lineno + 1, "no data rows");
  panel.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(panel.header.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      panel.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return panel;
}

namespace {

json matrix_json(const Eigen::MatrixXd& M) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(std::isfinite(M(r, c)) ? json(M(r, c)) : json(nullptr));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(std::isfinite(v(i)) ? json(v(i)) : json(nullptr));
  return out;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InvalidArgument(path + ": " + e.what());
  }
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw InvalidArgument(where + ": expected a JSON object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw InvalidArgument(where + ": unknown key '" + key + "'");
  }
}

ShockModel shock_model_from(const json& j, std::size_t n) {
  if (j.is_array()) {
    if (j.size() != n) throw InvalidArgument("shocks: one spec per variable expected");
    ShockModel m;
    for (const auto& s : j) m.shocks.push_back(shock_from_json(s));
    return m;
  }
  return ShockModel::iid(shock_from_json(j), n);
}

std::optional<bool> parse_on_off(const std::string& s) {
  if (s.empty()) return std::nullopt;
  if (s == "on") return true;
  if (s == "off") return false;
  throw InvalidArgument("expected 'on' or 'off', got '" + s + "'");
}

void write_text(const fs::path& file, const std::string& text) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream out(file);
  if (!out) throw InvalidArgument("cannot write " + file.string());
  out << text;
}

// --- estimate -------------------------------------------------------------

struct EstimateArgs {
  std::string data;
  std::string config;
  std::string out = ".";
  std::string estimator;
  std::string weighting;
  std::string scale_updating;
  std::string inference;
  std::string intercept;
  int lags = -1;
  double level = 0.0;
  std::optional<std::uint64_t> seed;
};

int cmd_estimate(EstimateArgs a, std::ostream& out, std::ostream& err) {
  json cfg = json::object();
  if (!a.config.empty()) {
    cfg = read_json_file(a.config);
    check_keys(cfg,
               {"schema_version", "data", "estimator", "weighting", "scale_updating", "inference", "lags", "intercept",
                "level", "seed", "tests", "shocks", "out"},
               "estimate config");
  }
  auto pick = [&](std::string& field, const char* key) {
    if (field.empty() && cfg.contains(key)) field = cfg.at(key).get<std::string>();
  };
  pick(a.data, "data");
  pick(a.estimator, "estimator");
  pick(a.weighting, "weighting");
  pick(a.scale_updating, "scale_updating");
  pick(a.inference, "inference");
  pick(a.intercept, "intercept");
  if (a.out == "." && cfg.contains("out")) a.out = cfg.at("out").get<std::string>();
  if (a.lags < 0) a.lags = cfg.value("lags", 0);
  if (a.level == 0.0) a.level = cfg.value("level", 0.90);
  if (!a.seed && cfg.contains("seed")) a.seed = cfg.at("seed").get<std::uint64_t>();
  if (a.data.empty()) throw InvalidArgument("estimate: no data file given");
  if (a.lags < 0) throw InvalidArgument("estimate: --lags must be non-negative");
  if (!(a.level > 0.0 && a.level < 1.0)) throw InvalidArgument("estimate: level must lie in (0,1)");
  if (!a.estimator.empty() && !a.weighting.empty())
    throw InvalidArgument("estimate: give either --estimator or --weighting, not both");

  std::ifstream in(a.data);
  if (!in) throw InvalidArgument("cannot open " + a.data);
  const CsvPanel panel = read_csv_panel(in);
  const Eigen::Index n = panel.values.cols();
  const bool intercept = parse_on_off(a.intercept).value_or(true);

  json doc = {{"schema_version", kOutputSchemaVersion},
              {"homent_version", kVersion},
              {"data", a.data},
              {"variables", panel.header},
              {"observations", panel.values.rows()},
              {"lags", a.lags},
              {"intercept", intercept}};

  Eigen::MatrixXd U;
  if (a.lags > 0 || intercept) {
    const VarFit fit = ols_var(panel.values, static_cast<std::size_t>(a.lags), intercept);
    U = fit.residuals;
    json var = {{"lag_matrices", json::array()}};
    for (const auto& A : fit.A) var["lag_matrices"].push_back(matrix_json(A));
    if (intercept) var["intercept"] = vector_json(fit.intercept);
    var["note"] = "inference treats the first-stage residuals as data";
    doc["var"] = var;
  } else {
    U = panel.values;
  }
  const ShockPanel shocks(U);
  const Eigen::Index T = U.rows();
  doc["residual_rows"] = T;

  if (n == 1) {
    const double m2 = U.col(0).squaredNorm() / static_cast<double>(T);
    const double m4 = U.col(0).array().pow(4).mean();
    if (!(m2 > 0.0)) {
      err << "estimate: the series has zero variance\n";
      return kExitNumericalFailure;
    }
    const double b = std::sqrt(m2);
    const double avar = std::max(m4 - m2 * m2, 0.0) / (4.0 * m2);
    const Interval ci = confidence_interval(0, Eigen::MatrixXd::Constant(1, 1, avar), Eigen::VectorXd::Constant(1, b),
                                            T, a.level);
    doc["estimator"] = "variance";
    doc["converged"] = true;
    doc["B_hat"] = json::array({json::array({b})});
    doc["inference"] = {{"basis", "sample"},
                        {"avar", json::array({json::array({avar})})},
                        {"level", a.level},
                        {"ci_lower", json::array({json::array({ci.lower})})},
                        {"ci_upper", json::array({json::array({ci.upper})})}};
    fs::create_directories(a.out);
    write_text(fs::path(a.out) / "estimate.json", doc.dump(2) + "\n");
    std::ostringstream csv;
    csv << "e1\n";
    for (Eigen::Index t = 0; t < T; ++t) csv << format_number(U(t, 0) / b) << '\n';
    write_text(fs::path(a.out) / "innovations.csv", csv.str());
    out << "B_hat = " << format_number(b) << '\n';
    return kExitOk;
  }

  const MomentSystem sys = full_moment_system(static_cast<std::size_t>(n));
  const MomentEvaluator ev(sys);
  std::optional<ShockModel> truth;
  std::optional<Eigen::MatrixXd> S_true;
  if (cfg.contains("shocks")) {
    truth = shock_model_from(cfg.at("shocks"), static_cast<std::size_t>(n));
    validate(*truth);
    S_true = s_true(*truth, sys);
  }
  OptimizerOptions opt;
  if (a.seed) opt.restart_seed = *a.seed;

  const std::optional<bool> scale = parse_on_off(a.scale_updating);
  EstimateResult est;
  std::string label;
  Basis natural = Basis::SMI;
  if (!a.weighting.empty()) {
    const bool su = scale.value_or(true);
    if (a.weighting == "identity") {
      est = minimize_gmm(shocks, ev, WeightingSpec::identity(su), default_start(shocks), opt);
      label = su ? "identity_scale_updated" : "identity";
    } else {
      EstimatorKind k;
      if (a.weighting == "si") k = su ? EstimatorKind::csue_si : EstimatorKind::gmm2;
      else if (a.weighting == "smi") k = su ? EstimatorKind::csue2 : EstimatorKind::gmm_smi;
      else if (a.weighting == "true") k = su ? EstimatorKind::csue_star : EstimatorKind::gmm_star;
      else throw InvalidArgument("estimate: --weighting must be si, smi, true or identity");
      if (needs_true_s(k) && !S_true) throw InvalidArgument("estimate: weighting 'true' needs 'shocks' in the config");
      est = run_estimator(k, shocks, ev, S_true, opt);
      label = estimator_name(k);
      natural = natural_basis(k);
    }
  } else {
    if (scale) throw InvalidArgument("estimate: --scale-updating applies to --weighting only");
    const EstimatorKind k = parse_estimator(a.estimator.empty() ? "csue2" : a.estimator);
    if (needs_true_s(k) && !S_true) throw InvalidArgument("estimate: " + estimator_name(k) + " needs 'shocks' in the config");
    est = run_estimator(k, shocks, ev, S_true, opt);
    label = estimator_name(k);
    natural = natural_basis(k);
  }
  const Basis basis = a.inference.empty() ? natural : parse_basis(a.inference);

  const SignedPermutation sp = sign_permute_convention(est.B_hat);
  const Eigen::VectorXd beta = vec(sp.B);
  doc["estimator"] = label;
  doc["weighting"] = est.weighting;
  doc["converged"] = est.converged;
  doc["loss"] = est.loss;
  doc["iterations"] = est.iterations;
  doc["restarts"] = est.restarts;
  doc["gradient_norm"] = est.gradient_norm;
  doc["message"] = est.message;
  doc["moment_conditions"] = sys.size();
  doc["B_hat"] = matrix_json(sp.B);
  doc["normalization"] = {{"mode", "convention"}, {"permutation", sp.perm}, {"sign", sp.sign}};

  bool inference_ok = true;
  try {
    const Inference inf = infer(est, shocks, ev, basis, truth ? &*truth : nullptr);
    const Eigen::MatrixXd V = permute_covariance(inf.avar.matrix, sp.perm, sp.sign);
    Eigen::MatrixXd se(n, n), lo(n, n), hi(n, n);
    for (Eigen::Index r = 0; r < n; ++r)
      for (Eigen::Index c = 0; c < n; ++c) {
        const Eigen::Index i = vec_index(r, c, n);
        const Interval ci = confidence_interval(i, V, beta, T, a.level);
        se(r, c) = std::sqrt(V(i, i) / static_cast<double>(T));
        lo(r, c) = ci.lower;
        hi(r, c) = ci.upper;
      }
    const char* s_source = basis == Basis::SMI ? "s_smi_empirical" : basis == Basis::SI ? "s_si" : "s_true";
    const char* g_source = basis == Basis::SMI ? "g_smi" : basis == Basis::SI ? "g_empirical" : "g_true";
    json inf_doc = {{"basis", basis_name(basis)},
                    {"S_source", s_source},
                    {"G_source", g_source},
                    {"floored", inf.avar.floored},
                    {"level", a.level},
                    {"avar", matrix_json(V)},
                    {"avar_layout", "column-major vec(B), scaled so that Var(vec(B_hat)) = avar / T"},
                    {"se", matrix_json(se)},
                    {"ci_lower", matrix_json(lo)},
                    {"ci_upper", matrix_json(hi)},
                    {"tests", json::array()}};
    if (cfg.contains("tests")) {
      for (const auto& tj : cfg.at("tests")) {
        const TestSpec t = test_from_json(tj, n);
        const WaldTest w = wald(t.restriction.R, t.restriction.r, beta, V, T);
        inf_doc["tests"].push_back({{"name", t.name},
                                    {"statistic", w.statistic},
                                    {"dof", w.dof},
                                    {"p_value", w.p_value},
                                    {"reject", w.p_value < 1.0 - a.level}});
      }
    }
    doc["inference"] = inf_doc;
  } catch (const UnidentifiedModelError& e) {
    doc["inference"] = {{"basis", basis_name(basis)}, {"error", e.what()}};
    inference_ok = false;
  }

  fs::create_directories(a.out);
  write_text(fs::path(a.out) / "estimate.json", doc.dump(2) + "\n");
  const Eigen::MatrixXd e = innovations(sp.B, shocks);
  std::ostringstream csv;
  for (Eigen::Index i = 0; i < n; ++i) csv << (i ? "," : "") << 'e' << i + 1;
  csv << '\n';
  for (Eigen::Index t = 0; t < T; ++t) {
    for (Eigen::Index i = 0; i < n; ++i) csv << (i ? "," : "") << format_number(e(t, i));
    csv << '\n';
  }
  write_text(fs::path(a.out) / "innovations.csv", csv.str());

  out << label << ": B_hat =\n" << sp.B << '\n';
  if (!est.converged) {
    err << "estimate: the optimizer did not converge (" << est.message << ", gradient norm "
        << format_number(est.gradient_norm) << ", " << est.restarts << " restarts)\n";
    return kExitNumericalFailure;
  }
  if (!inference_ok) {
    err << "estimate: " << doc["inference"]["error"].get<std::string>() << '\n';
    return kExitNumericalFailure;
  }
  return kExitOk;
}

// --- simulate -------------------------------------------------------------

struct SimulateArgs {
  std::string scenario;
  std::string out;
  unsigned threads = 0;
  std::optional<std::uint64_t> seed;
  int replications = 0;
  bool dry_run = false;
  bool fresh = false;
  bool quiet = false;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out, std::ostream& err) {
  if (a.scenario.empty()) throw InvalidArgument("simulate: no scenario file given");
  json j = read_json_file(a.scenario);
  if (a.seed) j["seed"] = *a.seed;
  if (a.replications > 0) j["replications"] = a.replications;
  const Scenario sc = scenario_from_json(j);
  const fs::path dir = a.out.empty() ? fs::path("runs") / sc.name : fs::path(a.out);
  if (a.dry_run) {
    json plan = {{"scenario", sc.name},
                 {"dimension", sc.dim()},
                 {"moment_conditions", full_moment_system(static_cast<std::size_t>(sc.dim())).size()},
                 {"sample_sizes", sc.sample_sizes},
                 {"replications", sc.replications},
                 {"estimators", json::array()},
                 {"inference", json::array()},
                 {"tests", json::array()},
                 {"records", sc.sample_sizes.size() * sc.estimators.size() * static_cast<std::size_t>(sc.replications)},
                 {"columns", record_columns(sc)},
                 {"seed", sc.seed},
                 {"scenario_hash", scenario_hash(sc)},
                 {"out", dir.string()}};
    for (auto k : sc.estimators) plan["estimators"].push_back(estimator_name(k));
    for (auto b : sc.bases) plan["inference"].push_back(basis_name(b));
    for (const auto& t : sc.tests) plan["tests"].push_back(t.name);
    out << plan.dump(2) << '\n';
    return kExitOk;
  }
  RunOptions opt;
  opt.out_dir = dir;
  opt.threads = a.threads;
  opt.resume = !a.fresh;
  opt.quiet = a.quiet;
  const RunSummary s = run_scenario(sc, opt);
  out << sc.name << ": " << s.records << " records (" << s.computed << " computed, " << s.failures
      << " not converged) in " << dir.string() << '\n';
  for (const auto& w : s.warnings) err << "warning: " << w << '\n';
  return kExitOk;
}

// --- noise-analyze --------------------------------------------------------

struct NoiseArgs {
  std::string config;
  std::string out;
  int n = 0;
  Eigen::Index T = 0;
  std::string weighting;
};

int cmd_noise(const NoiseArgs& a, std::ostream& out) {
  json cfg = json::object();
  if (!a.config.empty()) {
    cfg = read_json_file(a.config);
    check_keys(cfg, {"schema_version", "n", "T", "shocks", "B0", "B", "weighting", "grid"}, "noise-analyze config");
  }
  const int n = a.n > 0 ? a.n : cfg.value("n", 2);
  const Eigen::Index T = a.T > 0 ? a.T : cfg.value("T", Eigen::Index{1000});
  const std::string weighting = !a.weighting.empty() ? a.weighting : cfg.value("weighting", std::string("true"));
  if (n < 1 || T < 1) throw InvalidArgument("noise-analyze: n and T must be positive");
  const auto N = static_cast<Eigen::Index>(n);
  const ShockModel model =
      shock_model_from(cfg.contains("shocks") ? cfg.at("shocks") : json{{"kind", "gaussian_mixture"}},
                       static_cast<std::size_t>(n));
  validate(model);
  auto square = [&](const char* key) -> Eigen::MatrixXd {
    if (!cfg.contains(key)) return Eigen::MatrixXd::Identity(N, N);
    Eigen::MatrixXd M(N, N);
    const auto& rows = cfg.at(key);
    if (!rows.is_array() || static_cast<Eigen::Index>(rows.size()) != N)
      throw InvalidArgument(std::string("noise-analyze: ") + key + " must be n x n");
    for (Eigen::Index r = 0; r < N; ++r) {
      const auto& row = rows.at(static_cast<std::size_t>(r));
      if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != N)
        throw InvalidArgument(std::string("noise-analyze: ") + key + " must be n x n");
      for (Eigen::Index c = 0; c < N; ++c) M(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
    }
    return M;
  };
  const Eigen::MatrixXd B0 = square("B0");
  const Eigen::MatrixXd B = square("B");
  const MomentSystem sys = full_moment_system(static_cast<std::size_t>(n));
  const PopulationMomentFunctions pop(B0, model, sys);
  const auto K = static_cast<Eigen::Index>(sys.size());
  Eigen::MatrixXd W;
  if (weighting == "true") W = floored_inverse(pop.second_moment(B0)).inverse;
  else if (weighting == "identity") W = Eigen::MatrixXd::Identity(K, K);
  else throw InvalidArgument("noise-analyze: weighting must be 'true' or 'identity'");

  std::vector<Eigen::VectorXd> grid;
  const json g = cfg.contains("grid") ? cfg.at("grid") : json::array({0.8, 0.9, 1.0, 1.1, 1.2});
  for (const auto& v : g) {
    if (v.is_number()) {
      grid.push_back(Eigen::VectorXd::Constant(N, v.get<double>()));
    } else if (v.is_array() && static_cast<Eigen::Index>(v.size()) == N) {
      Eigen::VectorXd d(N);
      for (Eigen::Index i = 0; i < N; ++i) d(i) = v.at(static_cast<std::size_t>(i)).get<double>();
      grid.push_back(d);
    } else {
      throw InvalidArgument("noise-analyze: grid entries are numbers or length-n arrays");
    }
  }

  const Eigen::MatrixXd S = pop.second_moment(B);
  const Eigen::VectorXd Ef = pop.mean(B);
  auto total_at = [&](const Eigen::VectorXd& d) { return noise_decomposition(W, d, sys, S, Ef, T).total(); };
  json points = json::array();
  for (const auto& d : grid) {
    const NoiseDecomposition nd = noise_decomposition(W, d, sys, S, Ef, T);
    const Eigen::MatrixXd BD = B * d.asDiagonal();
    points.push_back({{"d", vector_json(d)},
                      {"quadratic", nd.term_quadratic},
                      {"cross", nd.term_cross},
                      {"constant", nd.term_constant},
                      {"total", nd.total()},
                      {"direct", (W * pop.second_moment(BD)).trace() / static_cast<double>(T)}});
  }
  json fd = json::array();
  const double h = 1e-5;
  for (Eigen::Index l = 0; l < N; ++l) {
    Eigen::VectorXd up = Eigen::VectorXd::Ones(N), dn = Eigen::VectorXd::Ones(N);
    up(l) += h;
    dn(l) -= h;
    fd.push_back((total_at(up) - total_at(dn)) / (2.0 * h));
  }
  json doc = {{"schema_version", kOutputSchemaVersion},
              {"n", n},
              {"moment_conditions", K},
              {"T", T},
              {"weighting", weighting},
              {"points", points},
              {"derivative_at_identity", noise_gradient_at_identity(sys, T)},
              {"finite_difference_at_identity", fd}};
  if (a.out.empty()) out << doc.dump(2) << '\n';
  else write_text(a.out, doc.dump(2) + "\n");
  return kExitOk;
}

// --- moments --------------------------------------------------------------

struct MomentsArgs {
  std::string config;
  std::string out;
  int max_order = 8;
};

int cmd_moments(const MomentsArgs& a, std::ostream& out) {
  const json spec = a.config.empty() ? json{{"kind", "gaussian_mixture"}} : read_json_file(a.config);
  const ShockDistribution d = shock_from_json(spec);
  if (a.max_order < 0) throw InvalidArgument("moments: --max-order must be non-negative");
  const auto cache = MomentCache::from_environment();
  const std::vector<double> m = cache ? cache->population_moments(d, a.max_order) : population_moments(d, a.max_order);
  json doc = {{"schema_version", kOutputSchemaVersion},
              {"distribution", canonical_key(d)},
              {"spec", shock_to_json(d)},
              {"moments", m},
              {"cache", cache ? json(cache->file().string()) : json(nullptr)}};
  if (a.out.empty()) out << doc.dump(2) << '\n';
  else write_text(a.out, doc.dump(2) + "\n");
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Higher-moment GMM estimation of structural VAR impact matrices", "homent"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  EstimateArgs ea;
  auto* est = app.add_subcommand("estimate", "Estimate B0 from a CSV panel of observables or reduced-form shocks");
  est->add_option("data", ea.data, "CSV file with a header row");
  est->add_option("--config", ea.config, "JSON config (keys as the flags, plus tests and shocks)");
  est->add_option("--out", ea.out, "Output directory for estimate.json and innovations.csv");
  est->add_option("--estimator", ea.estimator, "gmm_star, gmm2, gmm_smi, csue2, csue_si, csue_star, cue_si or cue_smi");
  est->add_option("--weighting", ea.weighting, "si, smi, true or identity (alternative to --estimator)");
  est->add_option("--scale-updating", ea.scale_updating, "on or off, with --weighting (default on)");
  est->add_option("--inference", ea.inference, "Basis of the asymptotic covariance: smi or si");
  est->add_option("--lags", ea.lags, "VAR lag order P of a first-stage least-squares fit")->check(CLI::NonNegativeNumber);
  est->add_option("--intercept", ea.intercept, "on or off: intercept in the first stage (default on)");
  est->add_option("--level", ea.level, "Confidence level of the intervals and tests (default 0.90)");
  est->add_option("--seed", ea.seed, "Seed of the optimizer restart perturbations");

  SimulateArgs sa;
  auto* sim = app.add_subcommand("simulate", "Run a Monte Carlo scenario");
  sim->add_option("scenario", sa.scenario, "Scenario JSON file");
  sim->add_option("--config", sa.scenario, "Scenario JSON file (same as the positional argument)");
  sim->add_option("--out", sa.out, "Output directory (default runs/<scenario name>)");
  sim->add_option("--threads", sa.threads, "Worker threads (default: available cores)");
  sim->add_option("--seed", sa.seed, "Override the scenario seed");
  sim->add_option("--replications", sa.replications, "Override the number of replications")->check(CLI::PositiveNumber);
  sim->add_flag("--dry-run", sa.dry_run, "Validate and print the resolved plan without computing");
  sim->add_flag("--fresh", sa.fresh, "Discard existing records instead of resuming");
  sim->add_flag("--quiet", sa.quiet, "No progress output");

  NoiseArgs na;
  auto* noise = app.add_subcommand("noise-analyze", "Decompose the expected noise term of the loss over a grid of scalings");
  noise->add_option("--config", na.config, "JSON with n, T, shocks, B0, B, weighting and grid");
  noise->add_option("--out", na.out, "Output JSON file (default stdout)");
  noise->add_option("--n", na.n, "Number of variables (default 2)");
  noise->add_option("--T", na.T, "Sample size (default 1000)");
  noise->add_option("--weighting", na.weighting, "true or identity (default true)");

  MomentsArgs ma;
  auto* mom = app.add_subcommand("moments", "Population raw moments of a standardized shock law");
  mom->add_option("--config", ma.config, "JSON shock spec, e.g. {\"kind\": \"student_t\", \"dof\": 9}");
  mom->add_option("--out", ma.out, "Output JSON file (default stdout)");
  mom->add_option("--max-order", ma.max_order, "Highest moment order (default 8)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitInputError;
  }

  try {
    if (est->parsed()) return cmd_estimate(ea, out, err);
    if (sim->parsed()) return cmd_simulate(sa, out, err);
    if (noise->parsed()) return cmd_noise(na, out);
    if (mom->parsed()) return cmd_moments(ma, out);
  } catch (const CsvError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInputError;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return kExitInputError;
  } catch (const json::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInputError;
  } catch (const std::exception& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitNumericalFailure;
  }
  return kExitInputError;
}

}  // namespace homent
